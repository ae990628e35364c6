//! Denoising filter `F` and noise residual extraction `W = I - F(I)`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::prnu_core::filters::{box_mean, gaussian_blur, reflect};
use crate::prnu_core::wavelet::{self, FilterBank};

/// Local-variance window half-widths (windows 3, 5, 7, 9).
const WIENER_RADII: [usize; 4] = [1, 2, 3, 4];

/// Grid the denoised output is snapped to, so that `residual + denoised`
/// reproduces the pixels bit for bit.
const SNAP: f64 = 1099511627776.0; // 2^40

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DenoiserConfig {
    /// Multi-level db4 decomposition with local Wiener shrinkage of the detail subbands.
    WaveletWiener {
        levels: usize,
        noise_variance: f64,
    },
    GaussianBlur {
        blur_sigma: f64,
    },
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig::WaveletWiener {
            levels: 4,
            noise_variance: 4.0,
        }
    }
}

impl DenoiserConfig {
    pub fn gaussian_fallback() -> Self {
        DenoiserConfig::GaussianBlur { blur_sigma: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DenoiserConfig::WaveletWiener { levels, noise_variance } => {
                if levels == 0 || levels > 16 {
                    return Err(Error::param(format!("wavelet levels must be in 1..=16, got {levels}")));
                }
                if !(noise_variance > 0.0 && noise_variance.is_finite()) {
                    return Err(Error::param(format!(
                        "noise_variance must be > 0, got {noise_variance}"
                    )));
                }
            }
            DenoiserConfig::GaussianBlur { blur_sigma } => {
                if !(blur_sigma > 0.0 && blur_sigma.is_finite()) {
                    return Err(Error::param(format!("blur_sigma must be > 0, got {blur_sigma}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseResidual {
    pub values: Array2<f64>,
}

impl NoiseResidual {
    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn denoise(image: &Image, config: &DenoiserConfig) -> Result<Array2<f64>> {
    denoise_matrix(&image.to_f64(), config)
}

/// `F` applied to a real-valued matrix.
pub fn denoise_matrix(input: &Array2<f64>, config: &DenoiserConfig) -> Result<Array2<f64>> {
    config.validate()?;
    let mut out = match *config {
        DenoiserConfig::GaussianBlur { blur_sigma } => gaussian_blur(input, blur_sigma),
        DenoiserConfig::WaveletWiener { levels, noise_variance } => wavelet_wiener(input, levels, noise_variance)?,
    };
    out.mapv_inplace(|v| (v * SNAP).round() / SNAP);
    Ok(out)
}

pub fn residual(image: &Image, config: &DenoiserConfig) -> Result<NoiseResidual> {
    residual_matrix(&image.to_f64(), config)
}

pub fn residual_matrix(input: &Array2<f64>, config: &DenoiserConfig) -> Result<NoiseResidual> {
    let denoised = denoise_matrix(input, config)?;
    Ok(NoiseResidual {
        values: input - &denoised,
    })
}

fn wavelet_wiener(input: &Array2<f64>, levels: usize, noise_variance: f64) -> Result<Array2<f64>> {
    let (rows, cols) = input.dim();
    let block = 1usize << levels;
    if rows < block || cols < block {
        return Err(Error::param(format!(
            "{rows}x{cols} image too small for {levels} wavelet levels (need sides >= {block})"
        )));
    }
    // Reflect-pad bottom/right up to a multiple of 2^levels.
    let pr = rows.div_ceil(block) * block;
    let pc = cols.div_ceil(block) * block;
    let mut data = Array2::from_shape_fn((pr, pc), |(r, c)| {
        input[[reflect(r as isize, rows), reflect(c as isize, cols)]]
    });

    let bank = FilterBank::db4();
    wavelet::forward(&mut data, &bank, levels);
    for level in 0..levels {
        let (r, c) = wavelet::band_dims((pr, pc), level);
        let (hr, hc) = (r / 2, c / 2);
        for (r0, c0) in [(0, hc), (hr, 0), (hr, hc)] {
            let mut sub = data.slice_mut(s![r0..r0 + hr, c0..c0 + hc]);
            let shrunk = wiener_shrink(&sub.to_owned(), noise_variance);
            sub.assign(&shrunk);
        }
    }
    wavelet::inverse(&mut data, &bank, levels);
    Ok(data.slice(s![..rows, ..cols]).to_owned())
}

/// Local Wiener shrinkage: the signal variance at each coefficient is the minimum
/// over the window sizes of `max(0, mean(c^2) - noise_variance)`.
fn wiener_shrink(coeffs: &Array2<f64>, noise_variance: f64) -> Array2<f64> {
    let squared = coeffs.mapv(|v| v * v);
    let mut local = Array2::from_elem(coeffs.dim(), f64::INFINITY);
    for radius in WIENER_RADII {
        let m = box_mean(&squared, radius);
        ndarray::Zip::from(&mut local)
            .and(&m)
            .for_each(|l, &v| *l = l.min((v - noise_variance).max(0.0)));
    }
    let mut out = coeffs.clone();
    ndarray::Zip::from(&mut out)
        .and(&local)
        .for_each(|c, &var| *c *= var / (var + noise_variance));
    out
}
