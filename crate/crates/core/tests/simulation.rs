//! Statistical behaviour of the pipeline on synthetic cameras, checked against
//! independent computations in the test code.

mod common;

use std::sync::OnceLock;

use ndarray::Array2;

use prnu_triangle::attack::{implant_fingerprint, minimum_alpha};
use prnu_triangle::eval::{
    h0_reference_pool, prepare_analyst, run_experiment, synthesize, Analyst, Dataset, Experiment, ExperimentConfig,
    SynthConfig,
};
use prnu_triangle::image::{Image, Role};
use prnu_triangle::prnu_core::fingerprint::Owner;
use prnu_triangle::prnu_core::{
    attribution_score, estimate_fingerprint, normalized_correlation, residual, DenoiserConfig,
};
use prnu_triangle::sensor_sim::{generate_content, generate_prnu, render_image, CameraProfile, ContentSpec};
use prnu_triangle::triangle::{fit_inference_line, true_pair_correlation, CorrelationPair};

use common::{mean, naive_corr, sample_var, welch_t};

/// One-sided upper-tail normal probability.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Binomial sign test: probability of at least `k` successes out of `n` fair coin flips.
fn sign_test_p(k: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for i in k..=n {
        let mut c = 1.0f64;
        for j in 0..i {
            c *= (n - j) as f64 / (j + 1) as f64;
        }
        p += c * 0.5f64.powi(n as i32);
    }
    p
}

fn render_many(cam: &CameraProfile, spec: &ContentSpec, n: u64, seed: u64) -> Vec<Image> {
    (0..n)
        .map(|i| {
            let content = generate_content(cam.dims(), spec, seed * 10_000 + i).unwrap();
            render_image(cam, &content, seed * 10_000 + 5_000 + i).unwrap()
        })
        .collect()
}

fn scene() -> ContentSpec {
    ContentSpec::SmoothRandom { radius: 6.0 }
}

struct Fixture {
    config: ExperimentConfig,
    dataset: Dataset,
    analyst: Analyst,
    pairs: Vec<CorrelationPair>,
    experiment: Experiment,
}

/// 128x128, N_c = 100, Eve uses N = 50 (half the public set).
fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut config = ExperimentConfig {
            seed: 11,
            dataset: SynthConfig {
                rows: 128,
                cols: 128,
                n_public: 100,
                n_line_fit: 150,
                n_calibration: 300,
                n_reference: 300,
                n_flat: 50,
                n_attack_source: 20,
                ..SynthConfig::default()
            },
            ..ExperimentConfig::default()
        };
        config.attack.n_eve = vec![50];
        config.setup_a.enabled = false;
        let dataset = synthesize(&config.dataset, config.seed).unwrap();
        let (analyst, pairs) = prepare_analyst(&config, &dataset).unwrap();
        let experiment = run_experiment(&config, &dataset).unwrap();
        Fixture {
            config,
            dataset,
            analyst,
            pairs,
            experiment,
        }
    })
}

#[test]
fn prnu_sample_std_near_sigma_k() {
    let k = generate_prnu((256, 256), 0.02, 99).unwrap();
    let n = k.len() as f64;
    let m = k.sum() / n;
    let sd = (k.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((0.018..=0.022).contains(&sd), "std {sd}");
}

#[test]
fn own_camera_residual_correlates_more_than_foreign() {
    let dims = (64, 64);
    let config = DenoiserConfig::default();
    let mut wins = 0;
    let n = 50;
    for s in 0..n {
        let own = CameraProfile::new("own", dims, 0.02, 2.0, 1000 + s).unwrap();
        let other = CameraProfile::new("other", dims, 0.02, 2.0, 2000 + s).unwrap();
        let i = &render_many(&own, &scene(), 1, s)[0];
        let i2 = &render_many(&other, &scene(), 1, 100 + s)[0];
        let w = residual(i, &config).unwrap().values;
        let w2 = residual(i2, &config).unwrap().values;
        let c_own = naive_corr(&w, &(i.to_f64() * &own.prnu));
        let c_other = naive_corr(&w2, &(i2.to_f64() * &own.prnu));
        wins += (c_own > c_other) as usize;
    }
    assert!(sign_test_p(wins, n as usize) < 1e-6, "{wins}/{n} pairs ordered");
}

#[test]
fn noiseless_residual_carries_the_pattern() {
    let dims = (64, 64);
    let config = DenoiserConfig::default();
    let mut positive = 0;
    let n = 20;
    for s in 0..n {
        let cam = CameraProfile::new("quiet", dims, 0.02, 0.0, 300 + s).unwrap();
        let img = &render_many(&cam, &scene(), 1, s)[0];
        let w = residual(img, &config).unwrap().values;
        positive += (naive_corr(&w, &(img.to_f64() * &cam.prnu)) > 0.0) as usize;
    }
    assert!(sign_test_p(positive, n as usize) < 1e-3, "{positive}/{n} positive");
}

#[test]
fn more_flat_fields_give_a_better_estimate() {
    let cam = CameraProfile::new("flat", (128, 128), 0.02, 2.0, 5).unwrap();
    let flats = render_many(&cam, &ContentSpec::Flat { level: 180.0 }, 50, 1);
    let config = DenoiserConfig::default();
    let k25 = estimate_fingerprint(&flats[..25], &config, Owner::Alice).unwrap();
    let k50 = estimate_fingerprint(&flats, &config, Owner::Alice).unwrap();
    let c25 = normalized_correlation(&k25.values, &cam.prnu).unwrap();
    let c50 = normalized_correlation(&k50.values, &cam.prnu).unwrap();
    assert!(c50 > c25, "corr with 50 images {c50}, with 25 images {c25}");
}

#[test]
fn attribution_separates_cameras() {
    let cam = CameraProfile::new("alice", (64, 64), 0.02, 0.0, 7).unwrap();
    let config = DenoiserConfig::default();
    let k = prnu_triangle::prnu_core::FingerprintEstimate::from_values(cam.prnu.clone(), 0, Owner::Alice);
    let own: Vec<f64> = render_many(&cam, &scene(), 20, 2)
        .iter()
        .map(|i| attribution_score(i, &k, &config).unwrap().rho)
        .collect();
    assert!(own.iter().all(|&r| r > 0.0), "own-camera scores {own:?}");

    // A fresh foreign camera per image: one fixed camera would share its chance
    // overlap with K across every score.
    let foreign: Vec<f64> = (0..60)
        .map(|s| {
            let other = CameraProfile::new("other", (64, 64), 0.02, 2.0, 800 + s).unwrap();
            let img = &render_many(&other, &scene(), 1, 900 + s)[0];
            attribution_score(img, &k, &config).unwrap().rho
        })
        .collect();
    let stderr = (sample_var(&foreign) / foreign.len() as f64).sqrt();
    assert!(
        mean(&foreign).abs() < 2.0 * stderr,
        "foreign mean {} stderr {stderr}",
        mean(&foreign)
    );
}

#[test]
fn held_out_tpr_matches_target() {
    let f = fixture();
    let scores: Vec<f64> = f
        .dataset
        .split(Role::Reference)
        .iter()
        .map(|i| {
            attribution_score(i, &f.analyst.fingerprint, &f.config.denoiser)
                .unwrap()
                .rho
        })
        .collect();
    assert_eq!(scores.len(), 300);
    let tpr = f.analyst.calibration.empirical_tpr(&scores);
    assert!((0.87..=0.93).contains(&tpr), "held-out TPR {tpr}");
}

#[test]
fn minimum_alpha_is_tight() {
    let cfg = SynthConfig {
        n_attack_source: 3,
        n_calibration: 100,
        ..common::small_synth(256, 60)
    };
    let config = ExperimentConfig {
        seed: 21,
        dataset: cfg,
        ..ExperimentConfig::default()
    };
    let dataset = synthesize(&config.dataset, config.seed).unwrap();
    let (analyst, _) = prepare_analyst(&config, &dataset).unwrap();
    let eve = estimate_fingerprint(&dataset.split(Role::Public)[..50], &config.denoiser, Owner::Eve).unwrap();
    let search = config.attack.search();
    for j in dataset.split(Role::AttackSource) {
        let r = minimum_alpha(
            j,
            &eve,
            &analyst.fingerprint,
            &analyst.calibration,
            &search,
            &config.denoiser,
        )
        .unwrap();
        let rho_at = |alpha: f64| {
            let img = implant_fingerprint(j, &eve, alpha).unwrap();
            attribution_score(&img, &analyst.fingerprint, &config.denoiser)
                .unwrap()
                .rho
        };
        assert!(r.alpha > 0.0);
        assert!(
            analyst.calibration.attributes(rho_at(r.alpha)),
            "alpha {} does not pass",
            r.alpha
        );
        let below = r.alpha - 2.0 * search.tolerance;
        assert!(
            !analyst.calibration.attributes(rho_at(below)),
            "alpha {below} already passes"
        );
    }
}

#[test]
fn independent_cameras_do_not_correlate() {
    let config = DenoiserConfig::default();
    let c: Vec<f64> = (0..60)
        .map(|s| {
            let a = CameraProfile::new("a", (64, 64), 0.02, 8.0, 400 + s).unwrap();
            let b = CameraProfile::new("b", (64, 64), 0.02, 8.0, 500 + s).unwrap();
            let i = &render_many(&a, &scene(), 1, 600 + s)[0];
            let j = &render_many(&b, &scene(), 1, 700 + s)[0];
            true_pair_correlation(i, j, &config).unwrap()
        })
        .collect();
    let stderr = (sample_var(&c) / c.len() as f64).sqrt();
    assert!(mean(&c).abs() < 2.0 * stderr, "mean {} stderr {stderr}", mean(&c));
}

#[test]
fn predicted_and_measured_correlations_agree_on_genuine_pairs() {
    let f = fixture();
    assert!(f.pairs.len() >= 100);
    let n = f.pairs.len() as f64;
    let x: Vec<f64> = f.pairs.iter().map(|p| p.c_hat).collect();
    let y: Vec<f64> = f.pairs.iter().map(|p| p.c_true).collect();
    let a = Array2::from_shape_vec((1, x.len()), x).unwrap();
    let b = Array2::from_shape_vec((1, y.len()), y).unwrap();
    let r = naive_corr(&a, &b);
    // Significance of a Pearson correlation through Fisher's z.
    let z = r.atanh() * (n - 3.0).sqrt();
    assert!(r > 0.0 && upper_tail(z) < 1e-6, "corr(c_hat, c) = {r} over {n} pairs");
}

#[test]
fn line_fit_recovers_a_known_line() {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let (lambda, eta, noise) = (0.8, 0.002, 0.01);
    let mut rng = prnu_triangle::seeding::rng_from(3);
    let pairs: Vec<CorrelationPair> = (0..500)
        .map(|i| {
            let c_hat: f64 = rng.random_range(0.0..0.05);
            CorrelationPair {
                candidate_id: format!("p{i}"),
                c_hat,
                c_true: lambda * c_hat + eta + noise * rng.sample::<f64, _>(StandardNormal),
            }
        })
        .collect();
    let line = fit_inference_line(&pairs).unwrap();
    let mx = mean(&pairs.iter().map(|p| p.c_hat).collect::<Vec<_>>());
    let sxx: f64 = pairs.iter().map(|p| (p.c_hat - mx).powi(2)).sum();
    let s2 = line.residual_rms.powi(2) * pairs.len() as f64 / (pairs.len() as f64 - 2.0);
    let se_lambda = (s2 / sxx).sqrt();
    assert!(
        (line.lambda - lambda).abs() < 3.0 * se_lambda,
        "lambda {} se {se_lambda}",
        line.lambda
    );
}

#[test]
fn forged_pairs_sit_above_the_line() {
    let f = fixture();
    let point = &f.experiment.report.sweep[0];
    let mut used = point.eve_source_ids.clone();
    used.sort();
    let mut above = 0;
    let mut total = 0;
    for exam in &f.experiment.sweep[0].examinations {
        for s in &exam.deviations.samples {
            if used.binary_search(&s.candidate_id).is_ok() {
                total += 1;
                above += (s.c_true > f.analyst.line.predict(s.c_hat)) as usize;
            }
        }
    }
    assert!(total > 0);
    assert!(
        sign_test_p(above, total) < 1e-6,
        "{above}/{total} used pairs above the line"
    );
}

#[test]
fn used_candidates_deviate_more() {
    let f = fixture();
    let point = &f.experiment.report.sweep[0];
    assert_eq!(point.n * 2, f.config.dataset.n_public);
    let mut used_ids = point.eve_source_ids.clone();
    used_ids.sort();
    let (mut used, mut unused) = (Vec::new(), Vec::new());
    for exam in &f.experiment.sweep[0].examinations {
        for s in &exam.deviations.samples {
            if used_ids.binary_search(&s.candidate_id).is_ok() {
                used.push(s.d);
            } else {
                unused.push(s.d);
            }
        }
    }
    let t = welch_t(&used, &unused);
    assert!(upper_tail(t) < 0.01, "Welch t = {t}");
}

#[test]
fn genuine_pool_is_centered() {
    let f = fixture();
    let refs: Vec<Image> = f.dataset.split(Role::Reference)[..40].to_vec();
    let pool = h0_reference_pool(&refs, &f.analyst).unwrap();
    let d = pool.samples();
    assert_eq!(d.len(), pool.len());
    let stderr = (sample_var(&d) / d.len() as f64).sqrt();
    // Deviations of one image share its residual, so the effective sample size is
    // the number of images rather than the number of pairs.
    let per_image: Vec<f64> = pool.groups.iter().map(|g| mean(&g.deviations)).collect();
    let stderr_images = (sample_var(&per_image) / per_image.len() as f64).sqrt();
    assert!(
        mean(&d).abs() < 2.0 * stderr.max(stderr_images),
        "pool mean {} stderr {}",
        mean(&d),
        stderr.max(stderr_images)
    );
}

#[test]
fn forged_images_have_large_v() {
    let f = fixture();
    let point = &f.experiment.report.sweep[0];
    let genuine: Vec<f64> = f
        .experiment
        .report
        .references
        .iter()
        .filter(|r| r.passes)
        .map(|r| r.statistics.v)
        .collect();
    let forged: Vec<f64> = point.forged.iter().map(|r| r.statistics.v).collect();
    assert!(!forged.is_empty());
    assert!(welch_t(&forged, &genuine) > 5.0);
}
