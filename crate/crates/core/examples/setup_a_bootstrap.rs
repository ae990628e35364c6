//! Setup (a): random k-subsets of candidates, Gaussian H0 model from genuine
//! references, and one p-value per subset.
//!
//! Run with `cargo run --release --example setup_a_bootstrap`.

use prnu_triangle::eval::{run_experiment, synthesize, ExperimentConfig, SynthConfig};
use prnu_triangle::triangle::StatisticKind;

fn main() -> prnu_triangle::Result<()> {
    let mut cfg = ExperimentConfig {
        seed: 5,
        dataset: SynthConfig {
            rows: 96,
            cols: 96,
            n_public: 100,
            n_line_fit: 80,
            n_calibration: 100,
            n_reference: 40,
            n_flat: 30,
            n_attack_source: 6,
            ..SynthConfig::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.attack.n_eve = vec![20, 50, 90];
    cfg.setup_a.k = 40;
    cfg.setup_a.reps = 500;
    cfg.setup_a.images = 3;
    cfg.setup_a.p_fa = 1e-3;
    cfg.setup_b.enabled = false;

    let ds = synthesize(&cfg.dataset, cfg.seed)?;
    let exp = run_experiment(&cfg, &ds)?;
    for m in &exp.report.h0_models {
        println!(
            "H0 {}: mean {:.2}, std {:.2} (k {}, {} replicates)",
            m.statistic_kind, m.mean, m.std, m.k, m.reps
        );
    }
    for p in &exp.report.sweep {
        println!(
            "N/N_c = {:.2}: P_d(L) {:.3}, P_d(V) {:.3} at P_fa {}",
            p.ratio,
            p.pd_setup_a(StatisticKind::L).unwrap_or(f64::NAN),
            p.pd_setup_a(StatisticKind::V).unwrap_or(f64::NAN),
            cfg.setup_a.p_fa
        );
    }
    Ok(())
}
