//! Setup (b): one statistic per test image over the whole candidate set, and an
//! empirical ROC of forged against genuine images.
//!
//! Run with `cargo run --release --example setup_b_roc`.

use prnu_triangle::eval::{run_experiment, synthesize, ExperimentConfig, SynthConfig};

fn main() -> prnu_triangle::Result<()> {
    let mut cfg = ExperimentConfig {
        seed: 9,
        dataset: SynthConfig {
            rows: 96,
            cols: 96,
            n_public: 100,
            n_line_fit: 100,
            n_calibration: 100,
            n_reference: 80,
            n_flat: 30,
            n_attack_source: 20,
            ..SynthConfig::default()
        },
        ..ExperimentConfig::default()
    };
    cfg.attack.n_eve = vec![10, 50, 90];
    cfg.setup_a.enabled = false;
    cfg.setup_b.p_fa = 0.03;

    let ds = synthesize(&cfg.dataset, cfg.seed)?;
    let exp = run_experiment(&cfg, &ds)?;
    for p in &exp.report.sweep {
        let row: Vec<String> = p
            .setup_b
            .iter()
            .map(|r| format!("{}: P_d {:.3} AUC {:.3}", r.statistic_kind, r.p_d_at_target, r.auc))
            .collect();
        println!("N/N_c = {:.2} ({} forged): {}", p.ratio, p.forged.len(), row.join(", "));
    }
    Ok(())
}
