//! Setup (a): a fixed test image is tested many times, each time on a fresh
//! random k-subset of the candidates, against a Gaussian model of the statistic
//! under H0.
//!
//! The H0 model is resampled hierarchically from genuine reference images: each
//! replicate picks one reference at random, then a random k-subset of that
//! reference's deviations, and evaluates the statistic under that reference's own
//! moments. Drawing the k deviations from a single image keeps the image-level
//! correlation between them, which a flat pool would wash out.

use libm::erfc;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::analyst::{Analyst, Examination};
use crate::image::Image;
use crate::seeding::{stream_rng, Stream};
use crate::triangle::{DeviationMoments, Hypothesis, StatisticKind};

/// Deviations of one genuine reference image against the candidate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolGroup {
    pub reference_id: String,
    pub deviations: Vec<f64>,
    pub moments: DeviationMoments,
}

/// Deviations of genuine reference images, kept grouped by image.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct H0Pool {
    pub groups: Vec<PoolGroup>,
}

impl H0Pool {
    pub fn from_examinations(exams: &[Examination]) -> Result<Self> {
        if exams.is_empty() {
            return Err(Error::param("the H0 pool needs at least one reference image"));
        }
        let groups = exams
            .iter()
            .map(|e| PoolGroup {
                reference_id: e.image_id.clone(),
                deviations: e.deviations.values(),
                moments: e.moments,
            })
            .collect();
        Ok(H0Pool { groups })
    }

    /// Total number of deviation samples.
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.deviations.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_references(&self) -> usize {
        self.groups.len()
    }

    /// All deviations, concatenated in group order.
    pub fn samples(&self) -> Vec<f64> {
        self.groups.iter().flat_map(|g| g.deviations.iter().copied()).collect()
    }

    /// The pool with one reference left out.
    pub fn without(&self, reference_id: &str) -> H0Pool {
        H0Pool {
            groups: self
                .groups
                .iter()
                .filter(|g| g.reference_id != reference_id)
                .cloned()
                .collect(),
        }
    }
}

/// Deviations of every reference image against every candidate.
///
/// References are expected to be genuine and to pass the detector; images tagged
/// as forged or as Eve's sources are rejected.
pub fn h0_reference_pool(references: &[Image], analyst: &Analyst) -> Result<H0Pool> {
    if references.is_empty() {
        return Err(Error::param("the H0 pool needs at least one reference image"));
    }
    for img in references {
        analyst.check_reference(img)?;
    }
    let exams: Vec<Examination> = analyst.examine_all(references).into_iter().collect::<Result<_>>()?;
    H0Pool::from_examinations(&exams)
}

/// Parameters of setup (a).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupAParams {
    /// Candidates per test.
    pub k: usize,
    /// Bootstrap replicates, for the H0 model and for the test image.
    pub reps: usize,
    /// False-alarm level the p-values are compared against (1e-3).
    pub p_fa: f64,
}

impl Default for SetupAParams {
    fn default() -> Self {
        SetupAParams {
            k: 60,
            reps: 2000,
            p_fa: 1e-3,
        }
    }
}

impl SetupAParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if self.reps == 0 {
            return Err(Error::param("bootstrap reps must be at least 1"));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::param(format!("p_fa must be in (0, 1), got {}", self.p_fa)));
        }
        Ok(())
    }
}

/// Gaussian model of one statistic under H0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H0Model {
    pub statistic_kind: StatisticKind,
    pub k: usize,
    pub reps: usize,
    pub mean: f64,
    pub std: f64,
}

fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

impl H0Model {
    /// One-sided p-value in the direction that indicates forgery.
    pub fn p_value(&self, value: f64) -> f64 {
        let z = (value - self.mean) / self.std;
        match self.statistic_kind {
            StatisticKind::V => upper_tail(z),
            StatisticKind::L => upper_tail(-z),
        }
    }

    /// H1 when the p-value falls strictly below `p_fa`.
    pub fn verdict(&self, value: f64, p_fa: f64) -> Hypothesis {
        if self.p_value(value) < p_fa {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Gaussian H0 model from statistics of genuine images computed with `k` candidates each.
pub fn h0_model_from_values(kind: StatisticKind, k: usize, values: &[f64]) -> Result<H0Model> {
    if values.len() < 2 {
        return Err(Error::DegenerateH0(format!(
            "{kind} needs at least 2 H0 values, got {}",
            values.len()
        )));
    }
    let (mean, std) = mean_std(values);
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::DegenerateH0(format!("{kind} H0 values have spread {std}")));
    }
    Ok(H0Model {
        statistic_kind: kind,
        k,
        reps: values.len(),
        mean,
        std,
    })
}

/// Bootstraps the H0 mean and spread of each statistic for `k`-subsets.
pub fn fit_h0_models(pool: &H0Pool, k: usize, reps: usize, kinds: &[StatisticKind], seed: u64) -> Result<Vec<H0Model>> {
    SetupAParams { k, reps, p_fa: 0.5 }.validate()?;
    if pool.groups.is_empty() {
        return Err(Error::param("the H0 pool is empty"));
    }
    if let Some(g) = pool.groups.iter().find(|g| g.deviations.len() < k) {
        return Err(Error::param(format!(
            "reference `{}` has {} deviations, fewer than k = {k}",
            g.reference_id,
            g.deviations.len()
        )));
    }
    let draws: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Stream::H0Bootstrap, r);
            let group = &pool.groups[rng.random_range(0..pool.groups.len())];
            let subset: Vec<f64> = sample(&mut rng, group.deviations.len(), k)
                .into_iter()
                .map(|i| group.deviations[i])
                .collect();
            kinds.iter().map(|kind| kind.compute(&subset, &group.moments)).collect()
        })
        .collect();
    kinds
        .iter()
        .enumerate()
        .map(|(col, &kind)| {
            let values: Vec<f64> = draws.iter().map(|row| row[col]).collect();
            let (mean, std) = mean_std(&values);
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::DegenerateH0(format!(
                    "bootstrap spread of {kind} is {std} over {reps} replicates"
                )));
            }
            Ok(H0Model {
                statistic_kind: kind,
                k,
                reps,
                mean,
                std,
            })
        })
        .collect()
}

/// Setup (a) outcome for one test image and one statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub statistic_kind: StatisticKind,
    pub k: usize,
    pub reps: usize,
    pub p_values: Vec<f64>,
    /// Fraction of `p_values` below `p_fa_target`.
    pub p_d: f64,
    pub p_fa_target: f64,
    pub h0_mean: f64,
    pub h0_std: f64,
}

/// Tests `reps` random `k`-subsets of the image's deviations against each H0 model.
pub fn bootstrap_setup_a(
    exam: &Examination,
    models: &[H0Model],
    params: &SetupAParams,
    seed: u64,
) -> Result<Vec<BootstrapReport>> {
    params.validate()?;
    let d = exam.deviations.values();
    if params.k > d.len() {
        return Err(Error::param(format!(
            "k = {} exceeds the {} deviations of `{}`",
            params.k,
            d.len(),
            exam.image_id
        )));
    }
    for m in models {
        if m.k != params.k {
            return Err(Error::param(format!(
                "H0 model for {} was fitted with k = {}, test uses k = {}",
                m.statistic_kind, m.k, params.k
            )));
        }
        if !(m.std > 0.0) {
            return Err(Error::DegenerateH0(format!(
                "{} model has zero spread",
                m.statistic_kind
            )));
        }
    }
    let rows: Vec<Vec<f64>> = (0..params.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Stream::H1Bootstrap, r);
            let subset: Vec<f64> = sample(&mut rng, d.len(), params.k).into_iter().map(|i| d[i]).collect();
            models
                .iter()
                .map(|m| m.p_value(m.statistic_kind.compute(&subset, &exam.moments)))
                .collect()
        })
        .collect();
    Ok(models
        .iter()
        .enumerate()
        .map(|(col, m)| {
            let p_values: Vec<f64> = rows.iter().map(|row| row[col]).collect();
            let below = p_values.iter().filter(|&&p| p < params.p_fa).count();
            BootstrapReport {
                statistic_kind: m.statistic_kind,
                k: params.k,
                reps: params.reps,
                p_d: below as f64 / params.reps as f64,
                p_values,
                p_fa_target: params.p_fa,
                h0_mean: m.mean,
                h0_std: m.std,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangle::{DeviationSample, DeviationSet, PooledStatistics};
    use rand_distr::StandardNormal;

    fn exam(id: &str, d: Vec<f64>, mu: f64, sigma: f64) -> Examination {
        let deviations = DeviationSet {
            samples: d
                .into_iter()
                .enumerate()
                .map(|(i, d)| DeviationSample {
                    candidate_id: format!("c{i:04}"),
                    c_hat: 0.0,
                    c_true: d,
                    d,
                })
                .collect(),
            skipped: 0,
        };
        let moments = DeviationMoments::new(mu, sigma).unwrap();
        Examination {
            image_id: id.into(),
            score: 0.5,
            statistics: PooledStatistics::compute(&deviations, &moments),
            deviations,
            moments,
        }
    }

    fn gaussian_exam(id: &str, n: usize, seed: u64) -> Examination {
        let mut rng = crate::seeding::rng_from(seed);
        let d = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        exam(id, d, 0.0, 1.0)
    }

    #[test]
    fn pool_cardinality_and_leave_one_out() {
        let exams = vec![gaussian_exam("a", 3, 1), gaussian_exam("b", 3, 2)];
        let pool = H0Pool::from_examinations(&exams).unwrap();
        assert_eq!(pool.len(), 6);
        assert_eq!(pool.samples().len(), 6);
        assert_eq!(pool.without("a").len(), 3);
        assert!(H0Pool::from_examinations(&[]).is_err());
    }

    #[test]
    fn p_value_at_mean_is_half() {
        for kind in StatisticKind::BOTH {
            let m = H0Model {
                statistic_kind: kind,
                k: 10,
                reps: 1,
                mean: 3.0,
                std: 2.0,
            };
            assert_eq!(m.p_value(3.0), 0.5);
        }
    }

    #[test]
    fn p_value_tails_follow_polarity() {
        let v = H0Model {
            statistic_kind: StatisticKind::V,
            k: 10,
            reps: 1,
            mean: 0.0,
            std: 1.0,
        };
        let l = H0Model {
            statistic_kind: StatisticKind::L,
            ..v
        };
        assert!(v.p_value(3.0) < 0.01 && v.p_value(-3.0) > 0.99);
        assert!(l.p_value(-3.0) < 0.01 && l.p_value(3.0) > 0.99);
        let p = v.p_value(1.0);
        assert!((p - 0.158_655_253_931_457).abs() < 1e-12, "{p}");
    }

    #[test]
    fn centered_deviations_never_reject() {
        let sigma = 0.5;
        let e = exam("j", vec![1.0; 80], 1.0, sigma);
        let k = 20;
        let l0 = -(k as f64) * 0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
        let models = [
            H0Model {
                statistic_kind: StatisticKind::L,
                k,
                reps: 1,
                mean: l0,
                std: 1.0,
            },
            H0Model {
                statistic_kind: StatisticKind::V,
                k,
                reps: 1,
                mean: 0.0,
                std: 1.0,
            },
        ];
        let params = SetupAParams {
            k,
            reps: 50,
            p_fa: 1e-3,
        };
        for rep in bootstrap_setup_a(&e, &models, &params, 9).unwrap() {
            assert!(rep.p_values.iter().all(|&p| (p - 0.5).abs() < 1e-12));
            assert_eq!(rep.p_d, 0.0);
        }
    }

    #[test]
    fn degenerate_pool_is_reported() {
        let exams = vec![exam("a", vec![0.0; 30], 0.0, 1.0)];
        let pool = H0Pool::from_examinations(&exams).unwrap();
        let err = fit_h0_models(&pool, 10, 100, &[StatisticKind::V], 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateH0(_)));
    }

    #[test]
    fn models_match_gaussian_theory() {
        let exams: Vec<_> = (0..40).map(|i| gaussian_exam(&format!("r{i}"), 200, i)).collect();
        let pool = H0Pool::from_examinations(&exams).unwrap();
        let models = fit_h0_models(&pool, 60, 4000, &StatisticKind::BOTH, 3).unwrap();
        // With unit moments V has mean 0 and variance 3k.
        let v = models[1];
        assert!(v.mean.abs() < 1.5, "{v:?}");
        assert!((v.std / (180f64).sqrt() - 1.0).abs() < 0.1, "{v:?}");
    }

    #[test]
    fn bootstrap_is_deterministic_and_checks_k() {
        let exams: Vec<_> = (0..5).map(|i| gaussian_exam(&format!("r{i}"), 100, i)).collect();
        let pool = H0Pool::from_examinations(&exams).unwrap();
        let models = fit_h0_models(&pool, 30, 300, &StatisticKind::BOTH, 5).unwrap();
        let j = gaussian_exam("j", 100, 77);
        let params = SetupAParams {
            k: 30,
            reps: 300,
            p_fa: 0.05,
        };
        let a = bootstrap_setup_a(&j, &models, &params, 11).unwrap();
        let b = bootstrap_setup_a(&j, &models, &params, 11).unwrap();
        assert_eq!(a, b);
        let frac = a[1].p_values.iter().filter(|&&p| p < 0.05).count() as f64 / 300.0;
        assert_eq!(frac, a[1].p_d);
        let too_big = SetupAParams { k: 101, ..params };
        assert!(bootstrap_setup_a(&j, &models, &too_big, 11).is_err());
        assert!(fit_h0_models(&pool, 101, 10, &StatisticKind::BOTH, 1).is_err());
    }
}
