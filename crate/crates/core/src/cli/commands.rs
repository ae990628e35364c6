use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::Outcome;
use crate::attack::{minimum_alpha, AttackRecord};
use crate::error::{Error, Result};
use crate::eval::{
    calibrate_alice, eve_subset, fit_line_on, h0_model_from_values, probe_all, run_experiment, synthesize, Analyst,
    Dataset, Examination, ExperimentConfig, Failure, H0Model, RocPoint,
};
use crate::image::{Image, Role};
use crate::io::{self, manifest, matrix, pgm};
use crate::prnu_core::{estimate_fingerprint, DetectorCalibration, FingerprintEstimate, Owner};
use crate::triangle::{Hypothesis, InferenceLine, StatisticKind};

const ALICE: &str = "alice.prnumat";
const CALIBRATION: &str = "calibration.json";
const LINE: &str = "line.json";
const LINE_PAIRS: &str = "line_pairs.csv";
const VERDICTS: &str = "verdicts.jsonl";
const REPORT: &str = "report.json";

fn require(path: PathBuf, producer: &'static str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, producer })
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    require(dir.join(manifest::FILE_NAME), "synthesize")?;
    Dataset::load(dir)
}

fn load_alice(dir: &Path, ds: &Dataset) -> Result<(FingerprintEstimate, DetectorCalibration)> {
    let values = matrix::read(&require(dir.join(ALICE), "calibrate")?)?;
    let calibration = io::read_json(&require(dir.join(CALIBRATION), "calibrate")?)?;
    let mut k_a = FingerprintEstimate::from_values(values, ds.split(Role::FlatField).len(), Owner::Alice);
    k_a.source_ids = ds.split(Role::FlatField).iter().map(|i| i.id.clone()).collect();
    Ok((k_a, calibration))
}

fn load_analyst(cfg: &ExperimentConfig, dir: &Path, ds: &Dataset) -> Result<Analyst> {
    let (k_a, calibration) = load_alice(dir, ds)?;
    let line: InferenceLine = io::read_json(&require(dir.join(LINE), "fit-line")?)?;
    let candidates = probe_all(ds.split(Role::Public), &k_a, &cfg.denoiser)?;
    let refs = probe_all(ds.split(Role::LineFit), &k_a, &cfg.denoiser)?;
    Analyst::new(
        k_a,
        calibration,
        line,
        candidates,
        refs,
        cfg.denoiser,
        cfg.triangle.moments,
    )
}

fn sweep_dir(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("n{n}"))
}

#[derive(Serialize)]
struct AttackRow<'a> {
    image_id: &'a str,
    forged_id: &'a str,
    alpha: f64,
    rho: f64,
    n_sources: usize,
}

#[derive(Serialize)]
struct DeviationRow<'a> {
    test_id: &'a str,
    candidate_id: &'a str,
    used: bool,
    c_hat: f64,
    c_true: f64,
    d: f64,
}

#[derive(Serialize)]
struct StatisticsRow<'a> {
    image_id: &'a str,
    score: f64,
    passes: bool,
    k: usize,
    skipped: usize,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "V")]
    v: f64,
    mu: f64,
    sigma: f64,
}

fn statistics_rows<'a>(
    exams: &'a [Examination],
    calibration: &'a DetectorCalibration,
) -> impl Iterator<Item = StatisticsRow<'a>> {
    exams.iter().map(move |e| StatisticsRow {
        image_id: &e.image_id,
        score: e.score,
        passes: calibration.attributes(e.score),
        k: e.statistics.k,
        skipped: e.statistics.skipped,
        l: e.statistics.l,
        v: e.statistics.v,
        mu: e.moments.mu,
        sigma: e.moments.sigma,
    })
}

/// Eve's fingerprint, forged images, the attack table and failures under `n<N>/`.
fn write_attack(
    dir: &Path,
    eve: &FingerprintEstimate,
    records: &[AttackRecord],
    forged: &[Image],
    failures: &[Failure],
) -> Result<()> {
    matrix::write(&dir.join("eve.prnumat"), &eve.values)?;
    io::write_json(&dir.join("eve_sources.json"), &eve.source_ids)?;
    for img in forged {
        pgm::write(&dir.join("forged").join(format!("{}.pgm", img.id)), img)?;
    }
    io::write_csv(
        &dir.join("attack_manifest.csv"),
        records.iter().map(|r| AttackRow {
            image_id: &r.image_id,
            forged_id: &r.forged_id,
            alpha: r.alpha,
            rho: r.rho,
            n_sources: r.n_sources,
        }),
    )?;
    io::write_csv(&dir.join("failures.csv"), failures)
}

fn write_deviations(path: &Path, exams: &[Examination], used: &[String]) -> Result<()> {
    let rows = exams.iter().flat_map(|e| {
        e.deviations.samples.iter().map(move |s| DeviationRow {
            test_id: &e.image_id,
            candidate_id: &s.candidate_id,
            used: used.binary_search(&s.candidate_id).is_ok(),
            c_hat: s.c_hat,
            c_true: s.c_true,
            d: s.d,
        })
    });
    io::write_csv(path, rows)
}

pub fn cmd_synthesize(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    cfg.validate_for(cfg.dataset.n_public)?;
    info!("synthesizing {}x{} dataset", cfg.dataset.rows, cfg.dataset.cols);
    let ds = synthesize(&cfg.dataset, cfg.seed)?;
    let m = ds.save(out)?;
    info!("wrote {} images to {}", m.entries.len(), out.display());
    Ok(Outcome::Complete)
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let ds = load_dataset(out)?;
    let (k_a, cal) = calibrate_alice(
        ds.split(Role::FlatField),
        ds.split(Role::Calibration),
        ds.split(Role::AttackSource),
        &cfg.denoiser,
        cfg.detector.target_tpr,
    )?;
    matrix::write(&out.join(ALICE), &k_a.values)?;
    io::write_json(&out.join(CALIBRATION), &cal)?;
    info!("threshold {:.5} from {} images", cal.threshold, cal.scores_used);
    Ok(Outcome::Complete)
}

pub fn cmd_fit_line(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let ds = load_dataset(out)?;
    let (k_a, _) = load_alice(out, &ds)?;
    let (line, pairs, _) = fit_line_on(ds.split(Role::LineFit), &k_a, &cfg.denoiser)?;
    io::write_json(&out.join(LINE), &line)?;
    io::write_csv(&out.join(LINE_PAIRS), &pairs)?;
    info!(
        "lambda {:.5} eta {:.6} over {} pairs",
        line.lambda, line.eta, line.n_fit
    );
    Ok(Outcome::Complete)
}

pub fn cmd_attack(cfg: &ExperimentConfig, out: &Path, only_n: Option<usize>) -> Result<Outcome> {
    let ds = load_dataset(out)?;
    let (k_a, cal) = load_alice(out, &ds)?;
    let ns = only_n.map(|n| vec![n]).unwrap_or_else(|| cfg.attack.n_eve.clone());
    let search = cfg.attack.search();
    let mut outcome = Outcome::Complete;
    for n in ns {
        let used = eve_subset(ds.split(Role::Public), n, cfg.seed)?;
        let eve = estimate_fingerprint(&used, &cfg.denoiser, Owner::Eve)?;
        let sources = ds.split(Role::AttackSource);
        let results: Vec<_> = sources
            .par_iter()
            .map(|j| minimum_alpha(j, &eve, &k_a, &cal, &search, &cfg.denoiser))
            .collect();
        let (mut records, mut forged, mut failures) = (Vec::new(), Vec::new(), Vec::new());
        for (j, r) in sources.iter().zip(results) {
            match r {
                Ok(a) => {
                    records.push(a.record(&j.id));
                    forged.push(a.forged);
                }
                Err(e @ Error::AttackInfeasible { .. }) => {
                    warn!("{}: {e}", j.id);
                    failures.push(Failure {
                        image_id: j.id.clone(),
                        error: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if !failures.is_empty() {
            outcome = Outcome::Partial;
        }
        write_attack(&sweep_dir(out, n), &eve, &records, &forged, &failures)?;
        info!("N = {n}: {} forged, {} infeasible", records.len(), failures.len());
    }
    Ok(outcome)
}

/// One line of `verdicts.jsonl`.
#[derive(Serialize)]
struct Verdict {
    image_id: String,
    origin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    result: Option<VerdictResult>,
}

#[derive(Serialize)]
struct VerdictResult {
    score: f64,
    passes_detector: bool,
    k: usize,
    skipped: usize,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "V")]
    v: f64,
    mu: f64,
    sigma: f64,
    p_values: BTreeMap<String, f64>,
    verdicts: BTreeMap<String, Hypothesis>,
}

fn forged_inputs(out: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut found = Vec::new();
    let entries = match std::fs::read_dir(out) {
        Ok(e) => e,
        Err(_) => return Ok(found),
    };
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("forged").is_dir())
        .collect();
    dirs.sort();
    for d in dirs {
        let origin = d
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let forged = d.join("forged");
        let mut files: Vec<PathBuf> = std::fs::read_dir(&forged)
            .map_err(|e| Error::io(&forged, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
            .collect();
        files.sort();
        found.extend(files.into_iter().map(|f| (origin.clone(), f)));
    }
    Ok(found)
}

fn file_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// H0 models from the detector-passing references, leaving `skip` out.
fn reference_models(refs: &[Examination], kinds: &[StatisticKind], skip: &str) -> Result<Vec<H0Model>> {
    let kept: Vec<&Examination> = refs.iter().filter(|e| e.image_id != skip).collect();
    let k = kept.first().map(|e| e.statistics.k).unwrap_or(0);
    kinds
        .iter()
        .map(|&kind| {
            let values: Vec<f64> = kept.iter().map(|e| kind.value_of(&e.statistics)).collect();
            h0_model_from_values(kind, k, &values)
        })
        .collect()
}

pub fn cmd_test(cfg: &ExperimentConfig, out: &Path, images: &[PathBuf], stdout: &mut dyn Write) -> Result<Outcome> {
    let ds = load_dataset(out)?;
    let analyst = load_analyst(cfg, out, &ds)?;
    let kinds = &cfg.triangle.statistics;

    let references: Vec<Examination> = analyst
        .examine_all(ds.split(Role::Reference))
        .into_iter()
        .collect::<Result<_>>()?;
    let genuine: Vec<Examination> = references.iter().filter(|e| analyst.passes(e)).cloned().collect();
    reference_models(&genuine, kinds, "")?;

    // (origin, exam or error) for every input, in a stable order.
    let mut inputs: Vec<(String, String, Result<Examination>)> = Vec::new();
    if images.is_empty() {
        for e in references {
            inputs.push(("reference".into(), e.image_id.clone(), Ok(e)));
        }
        let forged = forged_inputs(out)?;
        let exams: Vec<_> = forged
            .par_iter()
            .map(|(_, p)| pgm::read(p, &file_id(p)).and_then(|img| analyst.examine(&img)))
            .collect();
        for ((origin, p), r) in forged.into_iter().zip(exams) {
            inputs.push((origin, file_id(&p), r));
        }
    } else {
        let exams: Vec<_> = images
            .par_iter()
            .map(|p| pgm::read(p, &file_id(p)).and_then(|img| analyst.examine(&img)))
            .collect();
        for (p, r) in images.iter().zip(exams) {
            inputs.push((p.display().to_string(), file_id(p), r));
        }
    }

    let mut outcome = Outcome::Complete;
    let mut lines = Vec::new();
    for (origin, image_id, r) in inputs {
        let verdict = match r.and_then(|e| {
            let models = reference_models(&genuine, kinds, &e.image_id)?;
            Ok((e, models))
        }) {
            Ok((e, models)) => {
                let mut p_values = BTreeMap::new();
                let mut verdicts = BTreeMap::new();
                for m in &models {
                    let value = m.statistic_kind.value_of(&e.statistics);
                    p_values.insert(m.statistic_kind.to_string(), m.p_value(value));
                    verdicts.insert(m.statistic_kind.to_string(), m.verdict(value, cfg.test.p_fa));
                }
                Verdict {
                    image_id,
                    origin,
                    error: None,
                    result: Some(VerdictResult {
                        score: e.score,
                        passes_detector: analyst.passes(&e),
                        k: e.statistics.k,
                        skipped: e.statistics.skipped,
                        l: e.statistics.l,
                        v: e.statistics.v,
                        mu: e.moments.mu,
                        sigma: e.moments.sigma,
                        p_values,
                        verdicts,
                    }),
                }
            }
            Err(err) => {
                warn!("{image_id}: {err}");
                outcome = Outcome::Partial;
                Verdict {
                    image_id,
                    origin,
                    error: Some(err.to_string()),
                    result: None,
                }
            }
        };
        let line = serde_json::to_string(&verdict).map_err(|e| Error::format(VERDICTS, e.to_string()))?;
        writeln!(stdout, "{line}").map_err(|e| Error::io("<stdout>", e))?;
        lines.push(line);
    }
    let mut text = lines.join("\n");
    text.push('\n');
    io::write_atomic(&out.join(VERDICTS), text.as_bytes())?;
    Ok(outcome)
}

#[derive(Serialize)]
struct RocRow {
    p_fa: f64,
    p_d: f64,
}

impl From<&RocPoint> for RocRow {
    fn from(p: &RocPoint) -> Self {
        RocRow {
            p_fa: p.p_fa,
            p_d: p.p_d,
        }
    }
}

/// Runs the full protocol. The dataset already in `out` is reused; otherwise one
/// is synthesized there first. `report.json` is written last.
pub fn cmd_experiment(cfg: &ExperimentConfig, out: &Path, stdout: &mut dyn Write) -> Result<Outcome> {
    let ds = if out.join(manifest::FILE_NAME).exists() {
        info!("reusing dataset in {}", out.display());
        Dataset::load(out)?
    } else {
        info!("synthesizing {}x{} dataset", cfg.dataset.rows, cfg.dataset.cols);
        let ds = synthesize(&cfg.dataset, cfg.seed)?;
        ds.save(out)?;
        ds
    };
    let exp = run_experiment(cfg, &ds)?;
    let report = &exp.report;

    matrix::write(&out.join(ALICE), &exp.alice.values)?;
    io::write_json(&out.join(CALIBRATION), &report.calibration)?;
    io::write_json(&out.join(LINE), &report.line)?;
    io::write_csv(&out.join(LINE_PAIRS), &exp.line_pairs)?;
    io::write_csv(
        &out.join("references.csv"),
        statistics_rows(&exp.references, &report.calibration),
    )?;
    for (point, art) in report.sweep.iter().zip(&exp.sweep) {
        let dir = sweep_dir(out, point.n);
        write_attack(&dir, &art.eve, &point.attacks, &art.forged, &point.failures)?;
        let mut used = art.eve.source_ids.clone();
        used.sort();
        write_deviations(&dir.join("deviations.csv"), &art.examinations, &used)?;
        io::write_csv(
            &dir.join("forged.csv"),
            statistics_rows(&art.examinations, &report.calibration),
        )?;
        for roc in &point.setup_b {
            io::write_csv(
                &dir.join(format!("roc_{}.csv", roc.statistic_kind)),
                roc.curve.iter().map(RocRow::from),
            )?;
        }
    }
    let rows = report.sweep_rows();
    io::write_csv(&out.join("sweep.csv"), &rows)?;
    io::write_json(&out.join(REPORT), report)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::format("sweep.csv", e.to_string()))?;
    }
    let table = w.into_inner().map_err(|e| Error::format("sweep.csv", e.to_string()))?;
    stdout.write_all(&table).map_err(|e| Error::io("<stdout>", e))?;
    info!("report written to {}", out.join(REPORT).display());
    Ok(if report.has_failures() {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}
