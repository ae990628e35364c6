//! The triangle test on one forged and one genuine image: deviations from the
//! inference line and the pooled statistics L and V.
//!
//! Run with `cargo run --release --example triangle_statistics`.

use prnu_triangle::attack::minimum_alpha;
use prnu_triangle::eval::{eve_subset, prepare_analyst, synthesize, ExperimentConfig, SynthConfig};
use prnu_triangle::image::Role;
use prnu_triangle::prnu_core::{estimate_fingerprint, Owner};

fn main() -> prnu_triangle::Result<()> {
    let cfg = ExperimentConfig {
        seed: 3,
        dataset: SynthConfig {
            rows: 128,
            cols: 128,
            n_public: 80,
            n_line_fit: 80,
            n_calibration: 100,
            n_reference: 5,
            n_flat: 30,
            n_attack_source: 3,
            ..SynthConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let ds = synthesize(&cfg.dataset, cfg.seed)?;
    let (analyst, _) = prepare_analyst(&cfg, &ds)?;
    println!(
        "inference line c = {:.4} c_hat + {:.6} (rms {:.5}, {} pairs)",
        analyst.line.lambda, analyst.line.eta, analyst.line.residual_rms, analyst.line.n_fit
    );

    let used = eve_subset(ds.split(Role::Public), 60, cfg.seed)?;
    let used_ids: Vec<&str> = used.iter().map(|i| i.id.as_str()).collect();
    let k_e = estimate_fingerprint(&used, &cfg.denoiser, Owner::Eve)?;
    let j = &ds.split(Role::AttackSource)[0];
    let forged = minimum_alpha(
        j,
        &k_e,
        &analyst.fingerprint,
        &analyst.calibration,
        &cfg.attack.search(),
        &cfg.denoiser,
    )?;

    for (label, img) in [("genuine", &ds.split(Role::Reference)[0]), ("forged", &forged.forged)] {
        let exam = analyst.examine(img)?;
        let (mut du, mut dn) = (Vec::new(), Vec::new());
        for s in &exam.deviations.samples {
            if used_ids.contains(&s.candidate_id.as_str()) {
                du.push(s.d);
            } else {
                dn.push(s.d);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        println!(
            "{label:>7}: k {}, mean d used {:+.5} unused {:+.5}, mu_J {:+.5} sigma_J {:.5}, L {:.1}, V {:.1}",
            exam.statistics.k,
            mean(&du),
            mean(&dn),
            exam.moments.mu,
            exam.moments.sigma,
            exam.statistics.l,
            exam.statistics.v
        );
    }
    Ok(())
}
