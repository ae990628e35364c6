//! Estimates a camera fingerprint from flat fields and attributes images to it.
//!
//! Run with `cargo run --release --example fingerprint_attribution`.

use prnu_triangle::image::Image;
use prnu_triangle::prnu_core::{
    attribution_score, calibrate_threshold, estimate_fingerprint, normalized_correlation, DenoiserConfig, Owner,
};
use prnu_triangle::sensor_sim::{generate_content, render_image, CameraProfile, ContentSpec};

fn shoot(camera: &CameraProfile, spec: &ContentSpec, n: u64, seed: u64) -> prnu_triangle::Result<Vec<Image>> {
    (0..n)
        .map(|i| {
            render_image(
                camera,
                &generate_content(camera.dims(), spec, seed + i)?,
                seed + 1000 + i,
            )
        })
        .collect()
}

fn main() -> prnu_triangle::Result<()> {
    let dims = (128, 128);
    let alice = CameraProfile::new("alice", dims, 0.02, 2.0, 1)?;
    let other = CameraProfile::new("other", dims, 0.02, 2.0, 2)?;
    let denoiser = DenoiserConfig::default();

    let flats = shoot(&alice, &ContentSpec::Flat { level: 180.0 }, 40, 10)?;
    let k_a = estimate_fingerprint(&flats, &denoiser, Owner::Alice)?;
    println!(
        "K_A from {} flat fields: corr with the true PRNU {:.3}",
        k_a.n_images,
        normalized_correlation(&k_a.values, &alice.prnu)?
    );

    let scene = ContentSpec::SmoothRandom { radius: 6.0 };
    let score = |imgs: &[Image]| -> prnu_triangle::Result<Vec<f64>> {
        imgs.iter()
            .map(|i| attribution_score(i, &k_a, &denoiser).map(|s| s.rho))
            .collect()
    };
    let same = score(&shoot(&alice, &scene, 60, 200)?)?;
    let foreign = score(&shoot(&other, &scene, 60, 300)?)?;
    let cal = calibrate_threshold(&same, &foreign, 0.9)?;
    println!(
        "threshold {:.4} at target TPR 0.9: TPR {:.2}, FPR {:.2}",
        cal.threshold,
        cal.empirical_tpr(&same),
        cal.implied_fpr.unwrap_or(f64::NAN)
    );
    Ok(())
}
