//! Independent reference implementations and small fixtures shared by the
//! integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use std::path::Path;

use ndarray::Array2;
use prnu_triangle::eval::{ExperimentConfig, SynthConfig};

/// Two-pass Pearson correlation over the flattened entries.
pub fn naive_corr(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Gaussian log-likelihood written out term by term.
pub fn oracle_l(d: &[f64], mu: f64, sigma: f64) -> f64 {
    let mut total = 0.0;
    for &x in d {
        let density =
            (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
        total += density.ln();
    }
    total
}

/// Signed sum of squared standardized deviations.
pub fn oracle_v(d: &[f64], mu: f64, sigma: f64) -> f64 {
    d.iter()
        .map(|&x| {
            let z = (x - mu) / sigma;
            if z > 0.0 {
                z * z
            } else if z < 0.0 {
                -z * z
            } else {
                0.0
            }
        })
        .sum()
}

/// Element-wise `sum(W I) / (sum(I^2) + eps)` with `eps = scale * max(sum(I^2), 1)`.
pub fn oracle_fingerprint(pairs: &[(Array2<f64>, Array2<f64>)], guard_scale: f64) -> Array2<f64> {
    let dims = pairs[0].0.dim();
    let mut out = Array2::zeros(dims);
    for r in 0..dims.0 {
        for c in 0..dims.1 {
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, w) in pairs {
                num += w[[r, c]] * i[[r, c]];
                den += i[[r, c]] * i[[r, c]];
            }
            out[[r, c]] = num / (den + guard_scale * den.max(1.0));
        }
    }
    out
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Welch's t statistic for `mean(a) > mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let se = (sample_var(a) / a.len() as f64 + sample_var(b) / b.len() as f64).sqrt();
    (mean(a) - mean(b)) / se
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A small dataset that keeps the end-to-end tests fast.
pub fn small_synth(rows: usize, n_public: usize) -> SynthConfig {
    SynthConfig {
        rows,
        cols: rows,
        n_public,
        n_line_fit: 40,
        n_calibration: 60,
        n_reference: 30,
        n_flat: 20,
        n_attack_source: 12,
        ..SynthConfig::default()
    }
}

/// Smoke experiment: 64x64, N_c = 20, two attack strengths, small bootstrap.
pub fn smoke_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        dataset: SynthConfig {
            n_attack_source: 8,
            ..small_synth(64, 20)
        },
        ..ExperimentConfig::default()
    };
    cfg.attack.n_eve = vec![10, 18];
    cfg.setup_a.k = 10;
    cfg.setup_a.reps = 200;
    cfg.setup_b.p_fa = 0.1;
    cfg
}

/// Writes `cfg` as TOML next to the run directory and returns its path.
pub fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, toml::to_string(cfg).expect("config serializes")).expect("config written");
    path
}
