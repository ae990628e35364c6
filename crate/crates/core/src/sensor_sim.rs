//! Synthetic cameras with a planted PRNU.
//!
//! The forward model is `I = round(clip(content * (1 + K) + theta, 0, 255))`
//! with `K` a zero-mean Gaussian gain pattern and `theta` i.i.d. Gaussian
//! read-out noise, so that the noise residual of a rendered image behaves like
//! `I K + theta` to first order.

use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, quantize_pixel, Image};
use crate::prnu_core::filters::gaussian_blur;
use crate::seeding::rng_from;

pub const DEFAULT_SIGMA_K: f64 = 0.02;
pub const DEFAULT_THETA_SIGMA: f64 = 2.0;

/// Range smooth-random scenes are rescaled into.
pub const SMOOTH_RANGE: (f64, f64) = (0.2 * 255.0, 0.8 * 255.0);

#[derive(Clone, Debug)]
pub struct CameraProfile {
    pub id: String,
    /// Multiplicative gain pattern, same shape as the sensor.
    pub prnu: Array2<f64>,
    pub theta_sigma: f64,
    pub seed: u64,
}

impl CameraProfile {
    pub fn new(id: impl Into<String>, dims: (usize, usize), sigma_k: f64, theta_sigma: f64, seed: u64) -> Result<Self> {
        if !(theta_sigma >= 0.0 && theta_sigma.is_finite()) {
            return Err(Error::param(format!("theta_sigma must be >= 0, got {theta_sigma}")));
        }
        Ok(CameraProfile {
            id: id.into(),
            prnu: generate_prnu(dims, sigma_k, seed)?,
            theta_sigma,
            seed,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.prnu.dim()
    }
}

fn check_dims(dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::param(format!(
            "image dims must be >= 1, got {}x{}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

fn gaussian_field(dims: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = rng_from(seed);
    Array2::from_shape_simple_fn(dims, || rng.sample::<f64, _>(StandardNormal))
}

/// Zero-mean i.i.d. Gaussian gain pattern with per-entry deviation `sigma_k`.
///
/// The sample mean is removed exactly, so the pattern never carries a DC gain.
pub fn generate_prnu(dims: (usize, usize), sigma_k: f64, seed: u64) -> Result<Array2<f64>> {
    check_dims(dims)?;
    if !(sigma_k > 0.0 && sigma_k.is_finite()) {
        return Err(Error::param(format!("sigma_k must be > 0, got {sigma_k}")));
    }
    let mut k = gaussian_field(dims, seed) * sigma_k;
    if k.len() > 1 {
        let mean = k.mean().unwrap_or(0.0);
        k.mapv_inplace(|v| v - mean);
    }
    Ok(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContentSpec {
    Flat {
        level: f64,
    },
    /// Gaussian-smoothed white noise; `radius` is the smoothing sigma in pixels.
    SmoothRandom {
        radius: f64,
    },
    /// Horizontal linear ramp from the left to the right column.
    Gradient {
        from: f64,
        to: f64,
    },
}

/// Discriminant of [`ContentSpec`], as named in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContentKind {
    Flat,
    SmoothRandom,
    Gradient,
}

impl FromStr for ContentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(ContentKind::Flat),
            "smooth-random" => Ok(ContentKind::SmoothRandom),
            "gradient" => Ok(ContentKind::Gradient),
            other => Err(Error::param(format!("unknown content kind `{other}`"))),
        }
    }
}

impl ContentSpec {
    pub fn kind(&self) -> ContentKind {
        match self {
            ContentSpec::Flat { .. } => ContentKind::Flat,
            ContentSpec::SmoothRandom { .. } => ContentKind::SmoothRandom,
            ContentSpec::Gradient { .. } => ContentKind::Gradient,
        }
    }
}

/// Noise-free scene luminance.
#[derive(Clone, Debug)]
pub struct ContentField {
    pub values: Array2<f64>,
    pub kind: ContentKind,
}

impl ContentField {
    /// Multiplies the scene by an exposure factor in `[0, 1]`.
    pub fn exposed(mut self, exposure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&exposure) {
            return Err(Error::param(format!("exposure must be in [0, 1], got {exposure}")));
        }
        self.values.mapv_inplace(|v| v * exposure);
        Ok(self)
    }
}

fn check_level(v: f64, what: &str) -> Result<()> {
    if !(0.0..=255.0).contains(&v) {
        return Err(Error::param(format!("{what} must be in [0, 255], got {v}")));
    }
    Ok(())
}

pub fn generate_content(dims: (usize, usize), spec: &ContentSpec, seed: u64) -> Result<ContentField> {
    check_dims(dims)?;
    let values = match *spec {
        ContentSpec::Flat { level } => {
            check_level(level, "flat level")?;
            Array2::from_elem(dims, level)
        }
        ContentSpec::Gradient { from, to } => {
            check_level(from, "gradient start")?;
            check_level(to, "gradient end")?;
            let cols = dims.1;
            Array2::from_shape_fn(dims, |(_, c)| {
                if cols == 1 {
                    0.5 * (from + to)
                } else {
                    from + (to - from) * c as f64 / (cols - 1) as f64
                }
            })
        }
        ContentSpec::SmoothRandom { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::param(format!("smoothing radius must be > 0, got {radius}")));
            }
            let smooth = gaussian_blur(&gaussian_field(dims, seed), radius);
            let lo = smooth.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (a, b) = SMOOTH_RANGE;
            if hi - lo > 0.0 {
                smooth.mapv(|v| a + (b - a) * (v - lo) / (hi - lo))
            } else {
                Array2::from_elem(dims, 0.5 * (a + b))
            }
        }
    };
    Ok(ContentField {
        values,
        kind: spec.kind(),
    })
}

/// Renders `content` through `camera`'s sensor.
pub fn render_image(camera: &CameraProfile, content: &ContentField, noise_seed: u64) -> Result<Image> {
    check_same_dims(camera.dims(), content.values.dim(), "render_image")?;
    let mut rng = rng_from(noise_seed);
    let theta = camera.theta_sigma;
    let mut pixels = Array2::zeros(camera.dims());
    ndarray::Zip::from(&mut pixels)
        .and(&content.values)
        .and(&camera.prnu)
        .for_each(|p, &c, &k| {
            let noise = if theta > 0.0 {
                theta * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            *p = quantize_pixel(c * (1.0 + k) + noise);
        });
    Ok(Image::new(format!("{}-render", camera.id), pixels).with_source(camera.id.clone()))
}

/// Centered crop; when the margin is odd the extra row/column is dropped from the bottom/right.
pub fn central_crop(image: &Image, target: (usize, usize)) -> Result<Image> {
    let (rows, cols) = image.dims();
    if target.0 > rows || target.1 > cols || target.0 == 0 || target.1 == 0 {
        return Err(Error::param(format!(
            "cannot crop {rows}x{cols} to {}x{}",
            target.0, target.1
        )));
    }
    let top = (rows - target.0) / 2;
    let left = (cols - target.1) / 2;
    let pixels = image
        .pixels
        .slice(ndarray::s![top..top + target.0, left..left + target.1])
        .to_owned();
    Ok(Image {
        pixels,
        ..image.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera_with(prnu: Array2<f64>, theta_sigma: f64) -> CameraProfile {
        CameraProfile {
            id: "test".into(),
            prnu,
            theta_sigma,
            seed: 0,
        }
    }

    #[test]
    fn prnu_is_deterministic() {
        let a = generate_prnu((2, 2), 0.02, 99).unwrap();
        let b = generate_prnu((2, 2), 0.02, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_prnu((2, 2), 0.02, 100).unwrap());
    }

    #[test]
    fn prnu_sample_std_matches_sigma() {
        let k = generate_prnu((256, 256), 0.02, 3).unwrap();
        let n = k.len() as f64;
        let mean = k.sum() / n;
        let std = (k.mapv(|v| (v - mean).powi(2)).sum() / (n - 1.0)).sqrt();
        assert!((0.018..=0.022).contains(&std), "std {std}");
        assert!(mean.abs() <= 3.0 * 0.02 / n.sqrt());
    }

    #[test]
    fn prnu_rejects_bad_parameters() {
        assert!(generate_prnu((4, 4), 0.0, 1).is_err());
        assert!(generate_prnu((4, 4), -0.1, 1).is_err());
        assert!(generate_prnu((0, 4), 0.02, 1).is_err());
        assert!(CameraProfile::new("c", (4, 4), 0.02, -1.0, 1).is_err());
    }

    #[test]
    fn content_kinds() {
        let flat = generate_content((3, 4), &ContentSpec::Flat { level: 128.0 }, 0).unwrap();
        assert!(flat.values.iter().all(|&v| v == 128.0));

        let ramp = generate_content((1, 3), &ContentSpec::Gradient { from: 0.0, to: 255.0 }, 0).unwrap();
        assert_eq!(ramp.values.as_slice().unwrap(), &[0.0, 127.5, 255.0]);

        let smooth = generate_content((64, 48), &ContentSpec::SmoothRandom { radius: 4.0 }, 5).unwrap();
        assert!(smooth.values.iter().all(|&v| (51.0 - 1e-9..=204.0 + 1e-9).contains(&v)));
        let again = generate_content((64, 48), &ContentSpec::SmoothRandom { radius: 4.0 }, 5).unwrap();
        assert_eq!(smooth.values, again.values);

        assert!("checkerboard".parse::<ContentKind>().is_err());
        assert_eq!(
            "smooth-random".parse::<ContentKind>().unwrap(),
            ContentKind::SmoothRandom
        );
        assert!(generate_content((2, 2), &ContentSpec::Flat { level: 300.0 }, 0).is_err());
        assert!(generate_content((2, 2), &ContentSpec::SmoothRandom { radius: 0.0 }, 0).is_err());
    }

    #[test]
    fn identity_sensor() {
        let cam = camera_with(Array2::zeros((4, 5)), 0.0);
        let content = generate_content((4, 5), &ContentSpec::Flat { level: 100.0 }, 0).unwrap();
        let img = render_image(&cam, &content, 1).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 100));
    }

    #[test]
    fn single_pixel_gain() {
        let mut k = Array2::zeros((3, 3));
        k[[1, 2]] = 0.05;
        let cam = camera_with(k, 0.0);
        let content = generate_content((3, 3), &ContentSpec::Flat { level: 200.0 }, 0).unwrap();
        let img = render_image(&cam, &content, 1).unwrap();
        assert_eq!(img.pixels[[1, 2]], 210);
        assert_eq!(img.pixels[[0, 0]], 200);
    }

    #[test]
    fn noiseless_flat_field_is_exact() {
        let cam = CameraProfile::new("c", (16, 16), 0.02, 0.0, 11).unwrap();
        let content = generate_content((16, 16), &ContentSpec::Flat { level: 180.0 }, 0).unwrap();
        let img = render_image(&cam, &content, 4).unwrap();
        for ((r, c), &p) in img.pixels.indexed_iter() {
            assert_eq!(p, quantize_pixel(180.0 * (1.0 + cam.prnu[[r, c]])));
        }
    }

    #[test]
    fn render_rejects_mismatch_and_is_deterministic() {
        let cam = CameraProfile::new("c", (8, 8), 0.02, 2.0, 1).unwrap();
        let content = generate_content((8, 9), &ContentSpec::Flat { level: 10.0 }, 0).unwrap();
        assert!(render_image(&cam, &content, 0).is_err());
        let content = generate_content((8, 8), &ContentSpec::Flat { level: 100.0 }, 0).unwrap();
        assert_eq!(
            render_image(&cam, &content, 5).unwrap(),
            render_image(&cam, &content, 5).unwrap()
        );
    }

    #[test]
    fn crops() {
        let img = Image::new("x", Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as u8));
        let c = central_crop(&img, (2, 2)).unwrap();
        assert_eq!(c.pixels, ndarray::arr2(&[[5u8, 6], [9, 10]]));
        assert_eq!(central_crop(&img, (4, 4)).unwrap(), img);

        let img5 = Image::new("y", Array2::from_shape_fn((5, 5), |(r, c)| (r * 5 + c) as u8));
        let c5 = central_crop(&img5, (2, 2)).unwrap();
        assert_eq!(c5.pixels, ndarray::arr2(&[[6u8, 7], [11, 12]]));
        assert!(central_crop(&img5, (6, 2)).is_err());
    }
}
