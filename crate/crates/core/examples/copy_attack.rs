//! Eve estimates Alice's fingerprint from public images and plants it into a
//! photo from her own camera with the weakest strength that fools the detector.
//!
//! Run with `cargo run --release --example copy_attack`.

use prnu_triangle::attack::{minimum_alpha, AlphaSearch};
use prnu_triangle::eval::{calibrate_alice, synthesize, SynthConfig};
use prnu_triangle::image::Role;
use prnu_triangle::prnu_core::{attribution_score, estimate_fingerprint, DenoiserConfig, Owner};

fn main() -> prnu_triangle::Result<()> {
    let cfg = SynthConfig {
        rows: 128,
        cols: 128,
        n_public: 60,
        n_line_fit: 10,
        n_calibration: 100,
        n_reference: 10,
        n_flat: 30,
        n_attack_source: 5,
        ..SynthConfig::default()
    };
    let ds = synthesize(&cfg, 7)?;
    let denoiser = DenoiserConfig::default();
    let (k_a, cal) = calibrate_alice(
        ds.split(Role::FlatField),
        ds.split(Role::Calibration),
        ds.split(Role::AttackSource),
        &denoiser,
        0.9,
    )?;
    println!("detector threshold {:.4}", cal.threshold);

    for n in [5, 20, 60] {
        let k_e = estimate_fingerprint(&ds.split(Role::Public)[..n], &denoiser, Owner::Eve)?;
        print!("N = {n:>2}:");
        for j in ds.split(Role::AttackSource) {
            let before = attribution_score(j, &k_a, &denoiser)?.rho;
            match minimum_alpha(j, &k_e, &k_a, &cal, &AlphaSearch::default(), &denoiser) {
                Ok(r) => print!("  rho {before:+.3} -> {:.3} at alpha {:.3}", r.rho_achieved, r.alpha),
                Err(e) => print!("  {e}"),
            }
        }
        println!();
    }
    Ok(())
}
