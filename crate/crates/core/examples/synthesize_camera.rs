//! Renders a few images from a synthetic camera and checks the planted PRNU.
//!
//! Run with `cargo run --release --example synthesize_camera`.

use prnu_triangle::sensor_sim::{generate_content, render_image, CameraProfile, ContentSpec};

fn main() -> prnu_triangle::Result<()> {
    let camera = CameraProfile::new("alice", (128, 128), 0.02, 2.0, 42)?;
    let n = camera.prnu.len() as f64;
    let mean = camera.prnu.sum() / n;
    let std = (camera.prnu.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    println!(
        "PRNU {}x{}: mean {mean:.2e}, std {std:.4}",
        camera.dims().0,
        camera.dims().1
    );

    let scenes = [
        ("flat", ContentSpec::Flat { level: 180.0 }),
        ("gradient", ContentSpec::Gradient { from: 20.0, to: 235.0 }),
        ("smooth", ContentSpec::SmoothRandom { radius: 6.0 }),
    ];
    for (i, (name, spec)) in scenes.iter().enumerate() {
        let content = generate_content(camera.dims(), spec, i as u64)?;
        let img = render_image(&camera, &content, 100 + i as u64)?;
        let px = img.to_f64();
        println!(
            "{name:>8}: pixel range {}..{}, mean {:.1}",
            img.pixels.iter().min().unwrap(),
            img.pixels.iter().max().unwrap(),
            px.mean().unwrap()
        );
    }
    Ok(())
}
