//! Pooled triangle test.
//!
//! For a test image `J` and a candidate `I_i` from Alice's public set, the
//! measured residual correlation `c = corr(W_I, W_J)` is compared against the
//! value predicted from each image's correlation with Alice's fingerprint
//! (`c_hat`), through a straight line `c = lambda * c_hat + eta` fitted on pairs
//! known not to be involved in any forgery. The deviation from that line,
//! `d_i = c_i - lambda * c_hat_i - eta`, is large and positive for candidates Eve
//! used to build the implanted fingerprint.
//!
//! The deviations of one test image are pooled into either of two statistics:
//!
//! * `L`, the Gaussian log-likelihood of the deviations under H0
//!   (forgery when `L` is *below* the threshold), and
//! * `V`, the sum of squared standardized deviations carrying their sign
//!   (forgery when `V` is *above* the threshold). Only excess correlation counts
//!   as evidence, which is what makes the test one-tailed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, Image};
use crate::prnu_core::{attribution_from_residual, residual_matrix, DenoiserConfig, FingerprintEstimate, UnitVector};

const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub candidate_id: String,
    pub c_hat: f64,
    pub c_true: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceLine {
    pub lambda: f64,
    pub eta: f64,
    pub n_fit: usize,
    pub residual_rms: f64,
}

impl InferenceLine {
    pub fn predict(&self, c_hat: f64) -> f64 {
        self.lambda * c_hat + self.eta
    }

    pub fn deviation(&self, c_true: f64, c_hat: f64) -> f64 {
        c_true - self.predict(c_hat)
    }
}

/// One row of a deviation table: `d = c_true - lambda * c_hat - eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub candidate_id: String,
    pub c_hat: f64,
    pub c_true: f64,
    pub d: f64,
}

/// Deviations of one test image, ordered by candidate id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationSet {
    pub samples: Vec<DeviationSample>,
    /// Candidates dropped because a correlation was undefined.
    pub skipped: usize,
}

impl DeviationSet {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.d).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentEstimator {
    #[default]
    Sample,
    /// Median and scaled MAD; for sensitivity checks only.
    Robust,
}

impl FromStr for MomentEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(MomentEstimator::Sample),
            "robust" => Ok(MomentEstimator::Robust),
            other => Err(Error::param(format!("unknown moment estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationMoments {
    pub mu: f64,
    pub sigma: f64,
    pub estimator_kind: MomentEstimator,
}

impl DeviationMoments {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::degenerate(format!("invalid moments mu={mu}, sigma={sigma}")));
        }
        Ok(DeviationMoments {
            mu,
            sigma,
            estimator_kind: MomentEstimator::Sample,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    L,
    V,
}

impl StatisticKind {
    pub const BOTH: [StatisticKind; 2] = [StatisticKind::L, StatisticKind::V];

    /// Maps the statistic onto an axis where larger always means "more forged".
    pub fn evidence(self, value: f64) -> f64 {
        match self {
            StatisticKind::L => -value,
            StatisticKind::V => value,
        }
    }

    pub fn value_of(self, stats: &PooledStatistics) -> f64 {
        match self {
            StatisticKind::L => stats.l,
            StatisticKind::V => stats.v,
        }
    }

    /// Statistic of `deviations` under `moments`.
    pub fn compute(self, deviations: &[f64], moments: &DeviationMoments) -> f64 {
        match self {
            StatisticKind::L => pooled_l_values(deviations, moments),
            StatisticKind::V => pooled_v_values(deviations, moments),
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticKind::L => "L",
            StatisticKind::V => "V",
        })
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(StatisticKind::L),
            "V" | "v" => Ok(StatisticKind::V),
            other => Err(Error::param(format!("unknown statistic `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledStatistics {
    pub k: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub mu: f64,
    pub sigma: f64,
    pub skipped: usize,
}

impl PooledStatistics {
    pub fn compute(set: &DeviationSet, moments: &DeviationMoments) -> Self {
        let d = set.values();
        PooledStatistics {
            k: d.len(),
            l: pooled_l_values(&d, moments),
            v: pooled_v_values(&d, moments),
            mu: moments.mu,
            sigma: moments.sigma,
            skipped: set.skipped,
        }
    }
}

/// Per-image data the triangle test needs: the residual direction and the
/// correlation with Alice's fingerprint.
#[derive(Clone, Debug)]
pub struct Probe {
    pub id: String,
    pub residual: UnitVector,
    pub score: f64,
}

impl Probe {
    pub fn new(image: &Image, k_a: &FingerprintEstimate, config: &DenoiserConfig) -> Result<Self> {
        check_same_dims(image.dims(), k_a.dims(), "probe")?;
        let intensity = image.to_f64();
        let w = residual_matrix(&intensity, config)?;
        let score = attribution_from_residual(&intensity, &w.values, k_a)?.rho;
        Ok(Probe {
            id: image.id.clone(),
            residual: UnitVector::new(&w.values)?,
            score,
        })
    }

    /// Probes for many images in parallel; failures are kept per image.
    pub fn build_all(images: &[Image], k_a: &FingerprintEstimate, config: &DenoiserConfig) -> Vec<Result<Probe>> {
        images.par_iter().map(|img| Probe::new(img, k_a, config)).collect()
    }

    pub fn pair_with(&self, other: &Probe) -> Result<CorrelationPair> {
        Ok(CorrelationPair {
            candidate_id: other.id.clone(),
            c_hat: self.score * other.score,
            c_true: self.residual.correlate(&other.residual)?,
        })
    }
}

/// `c = corr(W_I, W_J)`.
pub fn true_pair_correlation(i: &Image, j: &Image, config: &DenoiserConfig) -> Result<f64> {
    check_same_dims(i.dims(), j.dims(), "true_pair_correlation")?;
    let wi = residual_matrix(&i.to_f64(), config)?;
    let wj = residual_matrix(&j.to_f64(), config)?;
    crate::prnu_core::normalized_correlation(&wi.values, &wj.values)
}

/// `c_hat = corr(W_I, I K_A) * corr(W_J, J K_A)`.
pub fn estimate_pair_correlation(
    i: &Image,
    j: &Image,
    k_a: &FingerprintEstimate,
    config: &DenoiserConfig,
) -> Result<f64> {
    check_same_dims(i.dims(), j.dims(), "estimate_pair_correlation")?;
    let si = crate::prnu_core::attribution_score(i, k_a, config)?.rho;
    let sj = crate::prnu_core::attribution_score(j, k_a, config)?.rho;
    Ok(si * sj)
}

/// Ordinary least squares of `c_true` on `c_hat`.
pub fn fit_inference_line(pairs: &[CorrelationPair]) -> Result<InferenceLine> {
    if pairs.len() < 2 {
        return Err(Error::param(format!(
            "inference line needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.c_hat).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.c_true).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in pairs {
        let dx = p.c_hat - mx;
        sxx += dx * dx;
        sxy += dx * (p.c_true - my);
    }
    if sxx == 0.0 {
        return Err(Error::param("inference line: all c_hat values are identical"));
    }
    let lambda = sxy / sxx;
    let eta = my - lambda * mx;
    let sse: f64 = pairs.iter().map(|p| (p.c_true - lambda * p.c_hat - eta).powi(2)).sum();
    Ok(InferenceLine {
        lambda,
        eta,
        n_fit: pairs.len(),
        residual_rms: (sse / n).sqrt(),
    })
}

/// All unordered pairs among `probes`, the non-forged population the line is fitted on.
pub fn all_pairs(probes: &[Probe]) -> Result<Vec<CorrelationPair>> {
    let rows: Vec<Vec<CorrelationPair>> = (0..probes.len())
        .into_par_iter()
        .map(|a| {
            (a + 1..probes.len())
                .map(|b| {
                    let mut pair = probes[a].pair_with(&probes[b])?;
                    pair.candidate_id = format!("{}|{}", probes[a].id, probes[b].id);
                    Ok(pair)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Deviations of `test` against pre-computed candidate probes, sorted by candidate id.
pub fn deviations_from_probes(test: &Probe, candidates: &[Probe], line: &InferenceLine) -> Result<DeviationSet> {
    let mut set = DeviationSet::default();
    for cand in candidates {
        match test.pair_with(cand) {
            Ok(p) => set.samples.push(DeviationSample {
                d: line.deviation(p.c_true, p.c_hat),
                candidate_id: p.candidate_id,
                c_hat: p.c_hat,
                c_true: p.c_true,
            }),
            Err(Error::Degenerate(_)) => set.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    set.samples.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
    Ok(set)
}

/// Deviations `d_i` of test image `j` against every candidate.
///
/// Candidates whose correlations are undefined are skipped and counted.
pub fn deviations(
    j: &Image,
    candidates: &[Image],
    line: &InferenceLine,
    k_a: &FingerprintEstimate,
    config: &DenoiserConfig,
) -> Result<DeviationSet> {
    if candidates.is_empty() {
        return Err(Error::param("deviations need at least one candidate"));
    }
    let test = Probe::new(j, k_a, config)?;
    let mut skipped = 0;
    let mut probes = Vec::with_capacity(candidates.len());
    for p in Probe::build_all(candidates, k_a, config) {
        match p {
            Ok(p) => probes.push(p),
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let mut set = deviations_from_probes(&test, &probes, line)?;
    set.skipped += skipped;
    Ok(set)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Location and scale of deviations from the values alone.
pub fn estimate_moments_values(d: &[f64], kind: MomentEstimator) -> Result<DeviationMoments> {
    if d.len() < 2 {
        return Err(Error::param(format!(
            "moments need at least 2 samples, got {}",
            d.len()
        )));
    }
    let (mu, sigma) = match kind {
        MomentEstimator::Sample => {
            let n = d.len() as f64;
            let mu = d.iter().sum::<f64>() / n;
            let var = d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
            (mu, var.sqrt())
        }
        MomentEstimator::Robust => {
            let mut sorted = d.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mu = median(&sorted);
            let mut abs_dev: Vec<f64> = sorted.iter().map(|x| (x - mu).abs()).collect();
            abs_dev.sort_by(f64::total_cmp);
            (mu, MAD_TO_SIGMA * median(&abs_dev))
        }
    };
    if !(sigma > 0.0) {
        return Err(Error::degenerate(format!(
            "deviations have zero spread under the {kind:?} estimator"
        )));
    }
    Ok(DeviationMoments {
        mu,
        sigma,
        estimator_kind: kind,
    })
}

pub fn estimate_moments(samples: &[DeviationSample], kind: MomentEstimator) -> Result<DeviationMoments> {
    let d: Vec<f64> = samples.iter().map(|s| s.d).collect();
    estimate_moments_values(&d, kind)
}

/// `L = -k ln sqrt(2 pi sigma^2) - sum ((d - mu) / (sqrt(2) sigma))^2`.
pub fn pooled_l_values(d: &[f64], m: &DeviationMoments) -> f64 {
    let k = d.len() as f64;
    let log_norm = 0.5 * (2.0 * std::f64::consts::PI * m.sigma * m.sigma).ln();
    let quad: f64 = d.iter().map(|x| ((x - m.mu) / m.sigma).powi(2)).sum();
    -k * log_norm - 0.5 * quad
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `V = sum sign(d - mu) ((d - mu) / sigma)^2` with `sign(0) = 0`.
pub fn pooled_v_values(d: &[f64], m: &DeviationMoments) -> f64 {
    d.iter()
        .map(|x| {
            let z = (x - m.mu) / m.sigma;
            signum0(z) * z * z
        })
        .sum()
}

pub fn pooled_l(samples: &[DeviationSample], moments: &DeviationMoments) -> f64 {
    pooled_l_values(&samples.iter().map(|s| s.d).collect::<Vec<_>>(), moments)
}

pub fn pooled_v(samples: &[DeviationSample], moments: &DeviationMoments) -> f64 {
    pooled_v_values(&samples.iter().map(|s| s.d).collect::<Vec<_>>(), moments)
}

/// `sum ((d - mu) / sigma)^2 = -2 (L + k ln sqrt(2 pi sigma^2))`, the unsigned
/// counterpart that bounds `|V|`.
pub fn unsigned_quadratic(l: f64, k: usize, sigma: f64) -> f64 {
    -2.0 * (l + k as f64 * 0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln())
}

/// Strict-inequality decision: `V > T'` or `L < T` means H1.
pub fn decide(value: f64, threshold: f64, kind: StatisticKind) -> Hypothesis {
    let forged = match kind {
        StatisticKind::V => value > threshold,
        StatisticKind::L => value < threshold,
    };
    if forged {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}
