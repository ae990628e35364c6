//! End-to-end protocol: calibrate the detector, fit the inference line, then for
//! every attack size N let Eve forge all her images and run both setups.

use libm::erfc;
use log::info;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{minimum_alpha, AlphaSearch, AttackRecord};
use crate::error::{Error, Result};
use crate::eval::analyst::{calibrate_alice, fit_line_on, probe_all, Analyst, Examination};
use crate::eval::bootstrap::{bootstrap_setup_a, fit_h0_models, BootstrapReport, H0Model, H0Pool, SetupAParams};
use crate::eval::dataset::{Dataset, SynthConfig};
use crate::eval::roc::{roc_setup_b, RocReport};
use crate::image::{Image, Role};
use crate::prnu_core::{estimate_fingerprint, DenoiserConfig, DetectorCalibration, FingerprintEstimate, Owner};
use crate::seeding::{derive_seed, stream_rng, Stream};
use crate::triangle::{CorrelationPair, InferenceLine, MomentEstimator, PooledStatistics, StatisticKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// True-positive rate the threshold is calibrated for.
    pub target_tpr: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams { target_tpr: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackParams {
    /// Sweep of N, the number of public images Eve estimates her fingerprint from.
    pub n_eve: Vec<usize>,
    pub alpha_max: f64,
    pub tolerance: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        let search = AlphaSearch::default();
        AttackParams {
            n_eve: vec![4, 50, 100, 180],
            alpha_max: search.alpha_max,
            tolerance: search.tolerance,
        }
    }
}

impl AttackParams {
    pub fn search(&self) -> AlphaSearch {
        AlphaSearch {
            alpha_max: self.alpha_max,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangleParams {
    pub moments: MomentEstimator,
    pub statistics: Vec<StatisticKind>,
}

impl Default for TriangleParams {
    fn default() -> Self {
        TriangleParams {
            moments: MomentEstimator::Sample,
            statistics: StatisticKind::BOTH.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupAConfig {
    pub enabled: bool,
    /// Forged images tested per N.
    pub images: usize,
    pub k: usize,
    pub reps: usize,
    pub p_fa: f64,
}

impl Default for SetupAConfig {
    fn default() -> Self {
        let p = SetupAParams::default();
        SetupAConfig {
            enabled: true,
            images: 2,
            k: p.k,
            reps: p.reps,
            p_fa: p.p_fa,
        }
    }
}

impl SetupAConfig {
    pub fn params(&self) -> SetupAParams {
        SetupAParams {
            k: self.k,
            reps: self.reps,
            p_fa: self.p_fa,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupBConfig {
    pub enabled: bool,
    /// Operating point read off the ROC.
    pub p_fa: f64,
}

impl Default for SetupBConfig {
    fn default() -> Self {
        SetupBConfig {
            enabled: true,
            p_fa: 0.03,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestParams {
    /// Level the one-sided p-values of single verdicts are compared against.
    pub p_fa: f64,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams { p_fa: 1e-3 }
    }
}

/// Every knob of an experiment. `N_c` is the size of the public split.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: SynthConfig,
    pub denoiser: DenoiserConfig,
    pub detector: DetectorParams,
    pub attack: AttackParams,
    pub triangle: TriangleParams,
    pub setup_a: SetupAConfig,
    pub setup_b: SetupBConfig,
    pub test: TestParams,
}

impl ExperimentConfig {
    /// Checks that do not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        self.denoiser.validate()?;
        self.attack.search().validate()?;
        if !(self.detector.target_tpr > 0.0 && self.detector.target_tpr < 1.0) {
            return Err(Error::param("detector.target_tpr must be in (0, 1)"));
        }
        if self.attack.n_eve.is_empty() || self.attack.n_eve.contains(&0) {
            return Err(Error::param("attack.n_eve must list sizes >= 1"));
        }
        if self.triangle.statistics.is_empty() {
            return Err(Error::param("triangle.statistics is empty"));
        }
        if self.setup_a.enabled {
            self.setup_a.params().validate()?;
        }
        if self.setup_b.enabled && !(self.setup_b.p_fa > 0.0 && self.setup_b.p_fa < 1.0) {
            return Err(Error::param("setup_b.p_fa must be in (0, 1)"));
        }
        if !(self.test.p_fa > 0.0 && self.test.p_fa < 1.0) {
            return Err(Error::param("test.p_fa must be in (0, 1)"));
        }
        Ok(())
    }

    /// Checks against the public set size `N_c`.
    pub fn validate_for(&self, n_c: usize) -> Result<()> {
        self.validate()?;
        if let Some(&n) = self.attack.n_eve.iter().find(|&&n| n > n_c) {
            return Err(Error::param(format!("N = {n} exceeds N_c = {n_c}")));
        }
        if self.setup_a.enabled && self.setup_a.k > n_c {
            return Err(Error::param(format!("k = {} exceeds N_c = {n_c}", self.setup_a.k)));
        }
        Ok(())
    }
}

/// Frequencies of negative deviations (`d < mu_J`) among candidates Eve used and
/// the rest, with a one-sided two-proportion z-test of "used is lower".
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OneTailSummary {
    pub used_below: usize,
    pub used_total: usize,
    pub unused_below: usize,
    pub unused_total: usize,
    pub z: f64,
    pub p_value: f64,
}

impl OneTailSummary {
    pub fn freq_used(&self) -> f64 {
        self.used_below as f64 / self.used_total.max(1) as f64
    }

    pub fn freq_unused(&self) -> f64 {
        self.unused_below as f64 / self.unused_total.max(1) as f64
    }
}

pub fn two_proportion_lower(below_a: usize, n_a: usize, below_b: usize, n_b: usize) -> (f64, f64) {
    if n_a == 0 || n_b == 0 {
        return (0.0, 1.0);
    }
    let (pa, pb) = (below_a as f64 / n_a as f64, below_b as f64 / n_b as f64);
    let pooled = (below_a + below_b) as f64 / (n_a + n_b) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se == 0.0 {
        return (0.0, 1.0);
    }
    let z = (pa - pb) / se;
    (z, 0.5 * erfc(-z / std::f64::consts::SQRT_2))
}

pub fn one_tail_separation(exams: &[Examination], used_ids: &[String]) -> OneTailSummary {
    let mut s = OneTailSummary::default();
    for e in exams {
        for smp in &e.deviations.samples {
            let below = smp.d < e.moments.mu;
            if used_ids.binary_search(&smp.candidate_id).is_ok() {
                s.used_total += 1;
                s.used_below += below as usize;
            } else {
                s.unused_total += 1;
                s.unused_below += below as usize;
            }
        }
    }
    (s.z, s.p_value) = two_proportion_lower(s.used_below, s.used_total, s.unused_below, s.unused_total);
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageStatistics {
    pub image_id: String,
    pub score: f64,
    pub passes: bool,
    pub statistics: PooledStatistics,
}

impl ImageStatistics {
    fn of(exam: &Examination, analyst: &Analyst) -> Self {
        ImageStatistics {
            image_id: exam.image_id.clone(),
            score: exam.score,
            passes: analyst.passes(exam),
            statistics: exam.statistics,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub image_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupAResult {
    pub image_id: String,
    pub reports: Vec<BootstrapReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub ratio: f64,
    pub eve_source_ids: Vec<String>,
    pub attacks: Vec<AttackRecord>,
    pub failures: Vec<Failure>,
    pub forged: Vec<ImageStatistics>,
    pub one_tail: OneTailSummary,
    pub setup_a: Vec<SetupAResult>,
    pub setup_b: Vec<RocReport>,
}

impl SweepPoint {
    /// Setup (b) detection rate for one statistic, if it ran.
    pub fn pd_setup_b(&self, kind: StatisticKind) -> Option<f64> {
        self.setup_b
            .iter()
            .find(|r| r.statistic_kind == kind)
            .map(|r| r.p_d_at_target)
    }

    /// Setup (a) detection rate averaged over the tested images.
    pub fn pd_setup_a(&self, kind: StatisticKind) -> Option<f64> {
        let pds: Vec<f64> = self
            .setup_a
            .iter()
            .flat_map(|r| r.reports.iter().filter(|b| b.statistic_kind == kind).map(|b| b.p_d))
            .collect();
        (!pds.is_empty()).then(|| pds.iter().sum::<f64>() / pds.len() as f64)
    }
}

/// One line of the P_d-versus-N table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub ratio: f64,
    pub forged: usize,
    pub failed: usize,
    pub mean_alpha: Option<f64>,
    pub pd_b_l: Option<f64>,
    pub pd_b_v: Option<f64>,
    pub pd_a_l: Option<f64>,
    pub pd_a_v: Option<f64>,
    pub one_tail_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dims: (usize, usize),
    pub n_c: usize,
    pub calibration: DetectorCalibration,
    pub line: InferenceLine,
    pub references: Vec<ImageStatistics>,
    pub h0_models: Vec<H0Model>,
    pub sweep: Vec<SweepPoint>,
}

impl ExperimentReport {
    pub fn sweep_rows(&self) -> Vec<SweepRow> {
        self.sweep
            .iter()
            .map(|p| SweepRow {
                n: p.n,
                ratio: p.ratio,
                forged: p.attacks.len(),
                failed: p.failures.len(),
                mean_alpha: (!p.attacks.is_empty())
                    .then(|| p.attacks.iter().map(|a| a.alpha).sum::<f64>() / p.attacks.len() as f64),
                pd_b_l: p.pd_setup_b(StatisticKind::L),
                pd_b_v: p.pd_setup_b(StatisticKind::V),
                pd_a_l: p.pd_setup_a(StatisticKind::L),
                pd_a_v: p.pd_setup_a(StatisticKind::V),
                one_tail_p: p.one_tail.p_value,
            })
            .collect()
    }

    pub fn has_failures(&self) -> bool {
        self.sweep.iter().any(|p| !p.failures.is_empty())
    }
}

/// Bulky intermediate results, kept out of the JSON report.
#[derive(Clone, Debug)]
pub struct SweepArtifacts {
    pub n: usize,
    pub eve: FingerprintEstimate,
    pub forged: Vec<Image>,
    pub examinations: Vec<Examination>,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub report: ExperimentReport,
    pub alice: FingerprintEstimate,
    pub line_pairs: Vec<CorrelationPair>,
    pub references: Vec<Examination>,
    pub sweep: Vec<SweepArtifacts>,
}

/// Calibration, line fit and candidate probes in one go.
pub fn prepare_analyst(config: &ExperimentConfig, dataset: &Dataset) -> Result<(Analyst, Vec<CorrelationPair>)> {
    info!("estimating K_A and calibrating the detector");
    let (k_a, calibration) = calibrate_alice(
        dataset.split(Role::FlatField),
        dataset.split(Role::Calibration),
        dataset.split(Role::AttackSource),
        &config.denoiser,
        config.detector.target_tpr,
    )?;
    info!("detector threshold {:.4}", calibration.threshold);
    let (line, pairs, line_probes) = fit_line_on(dataset.split(Role::LineFit), &k_a, &config.denoiser)?;
    info!(
        "inference line lambda {:.4} eta {:.6} over {} pairs",
        line.lambda, line.eta, line.n_fit
    );
    let candidates = probe_all(dataset.split(Role::Public), &k_a, &config.denoiser)?;
    let analyst = Analyst::new(
        k_a,
        calibration,
        line,
        candidates,
        line_probes,
        config.denoiser,
        config.triangle.moments,
    )?;
    Ok((analyst, pairs))
}

/// Eve's N public images, drawn without replacement and kept in split order.
pub fn eve_subset(public: &[Image], n: usize, seed: u64) -> Result<Vec<Image>> {
    if n == 0 || n > public.len() {
        return Err(Error::param(format!(
            "cannot draw N = {n} from {} public images",
            public.len()
        )));
    }
    let mut idx = sample(&mut stream_rng(seed, Stream::EveSubset, n as u64), public.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| public[i].clone()).collect())
}

pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset) -> Result<Experiment> {
    dataset.validate()?;
    let n_c = dataset.split(Role::Public).len();
    config.validate_for(n_c)?;
    let kinds = &config.triangle.statistics;
    let (analyst, line_pairs) = prepare_analyst(config, dataset)?;

    info!("examining {} reference images", dataset.split(Role::Reference).len());
    for img in dataset.split(Role::Reference) {
        analyst.check_reference(img)?;
    }
    let references: Vec<Examination> = analyst
        .examine_all(dataset.split(Role::Reference))
        .into_iter()
        .collect::<Result<_>>()?;
    let genuine: Vec<Examination> = references.iter().filter(|e| analyst.passes(e)).cloned().collect();
    if genuine.is_empty() {
        return Err(Error::degenerate("no reference image passes the detector"));
    }

    let h0_models = if config.setup_a.enabled {
        let pool = H0Pool::from_examinations(&genuine)?;
        fit_h0_models(&pool, config.setup_a.k, config.setup_a.reps, kinds, config.seed)?
    } else {
        Vec::new()
    };

    let mut sweep = Vec::new();
    let mut artifacts = Vec::new();
    for &n in &config.attack.n_eve {
        info!(
            "N = {n}: estimating K_E and forging {} images",
            dataset.split(Role::AttackSource).len()
        );
        let used = eve_subset(dataset.split(Role::Public), n, config.seed)?;
        let eve = estimate_fingerprint(&used, &config.denoiser, Owner::Eve)?;
        let search = config.attack.search();
        let outcomes: Vec<_> = dataset
            .split(Role::AttackSource)
            .par_iter()
            .map(|j| {
                let attack = minimum_alpha(
                    j,
                    &eve,
                    &analyst.fingerprint,
                    &analyst.calibration,
                    &search,
                    &config.denoiser,
                )?;
                let exam = analyst.examine(&attack.forged)?;
                Ok((attack, exam))
            })
            .collect();

        let mut attacks = Vec::new();
        let mut failures = Vec::new();
        let mut forged = Vec::new();
        let mut exams = Vec::new();
        for (j, outcome) in dataset.split(Role::AttackSource).iter().zip(outcomes) {
            match outcome {
                Ok((attack, exam)) => {
                    attacks.push(attack.record(&j.id));
                    forged.push(attack.forged);
                    exams.push(exam);
                }
                Err(e @ (Error::AttackInfeasible { .. } | Error::Degenerate(_))) => failures.push(Failure {
                    image_id: j.id.clone(),
                    error: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        info!("N = {n}: {} forged, {} failed", attacks.len(), failures.len());

        let mut used_ids = eve.source_ids.clone();
        used_ids.sort();
        let one_tail = one_tail_separation(&exams, &used_ids);

        let setup_b = if config.setup_b.enabled && !exams.is_empty() {
            roc_setup_b(&exams, &genuine, kinds, config.setup_b.p_fa)?
        } else {
            Vec::new()
        };

        let mut setup_a = Vec::new();
        if config.setup_a.enabled {
            for (i, exam) in exams.iter().take(config.setup_a.images).enumerate() {
                let seed = derive_seed(config.seed, Stream::SetupAImage, ((n as u64) << 32) | i as u64);
                setup_a.push(SetupAResult {
                    image_id: exam.image_id.clone(),
                    reports: bootstrap_setup_a(exam, &h0_models, &config.setup_a.params(), seed)?,
                });
            }
        }

        sweep.push(SweepPoint {
            n,
            ratio: n as f64 / n_c as f64,
            eve_source_ids: eve.source_ids.clone(),
            attacks,
            failures,
            forged: exams.iter().map(|e| ImageStatistics::of(e, &analyst)).collect(),
            one_tail,
            setup_a,
            setup_b,
        });
        artifacts.push(SweepArtifacts {
            n,
            eve,
            forged,
            examinations: exams,
        });
    }

    let report = ExperimentReport {
        config: config.clone(),
        dims: dataset.dims,
        n_c,
        calibration: analyst.calibration.clone(),
        line: analyst.line,
        references: references.iter().map(|e| ImageStatistics::of(e, &analyst)).collect(),
        h0_models,
        sweep,
    };
    Ok(Experiment {
        report,
        alice: analyst.fingerprint,
        line_pairs,
        references,
        sweep: artifacts,
    })
}
