//! PRNU estimation `K = sum(W_i I_i) / sum(I_i^2)` and camera attribution.

use std::fmt;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, Image};
use crate::prnu_core::correlation::normalized_correlation;
use crate::prnu_core::denoise::{residual_matrix, DenoiserConfig};

/// Relative size of the denominator guard: `eps = scale * max(sum I^2, 1)`.
pub const DEFAULT_GUARD_SCALE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Eve,
    Alice,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Eve => "eve",
            Owner::Alice => "alice",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintEstimate {
    pub values: Array2<f64>,
    pub n_images: usize,
    pub owner: Owner,
    /// Ids of the images the estimate was built from, when known.
    pub source_ids: Vec<String>,
}

impl FingerprintEstimate {
    /// Wraps a known matrix (ground truth or one read from disk).
    pub fn from_values(values: Array2<f64>, n_images: usize, owner: Owner) -> Self {
        FingerprintEstimate {
            values,
            n_images,
            owner,
            source_ids: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Streams `(intensity, residual)` pairs into the numerator and denominator sums.
#[derive(Clone, Debug)]
pub struct FingerprintAccumulator {
    numerator: Array2<f64>,
    denominator: Array2<f64>,
    count: usize,
    guard_scale: f64,
}

impl FingerprintAccumulator {
    pub fn new(dims: (usize, usize)) -> Self {
        Self::with_guard(dims, DEFAULT_GUARD_SCALE)
    }

    /// `guard_scale = 0` gives the bare ratio (division by zero is then the caller's problem).
    pub fn with_guard(dims: (usize, usize), guard_scale: f64) -> Self {
        FingerprintAccumulator {
            numerator: Array2::zeros(dims),
            denominator: Array2::zeros(dims),
            count: 0,
            guard_scale,
        }
    }

    pub fn add(&mut self, intensity: &Array2<f64>, residual: &Array2<f64>) -> Result<()> {
        check_same_dims(self.numerator.dim(), intensity.dim(), "fingerprint accumulation")?;
        check_same_dims(intensity.dim(), residual.dim(), "fingerprint accumulation")?;
        ndarray::Zip::from(&mut self.numerator)
            .and(&mut self.denominator)
            .and(intensity)
            .and(residual)
            .for_each(|num, den, &i, &w| {
                *num += w * i;
                *den += i * i;
            });
        self.count += 1;
        Ok(())
    }

    pub fn finish(self, owner: Owner) -> Result<FingerprintEstimate> {
        if self.count == 0 {
            return Err(Error::param("fingerprint estimate needs at least one image"));
        }
        let g = self.guard_scale;
        let mut values = self.numerator;
        ndarray::Zip::from(&mut values)
            .and(&self.denominator)
            .for_each(|k, &den| *k /= den + g * den.max(1.0));
        Ok(FingerprintEstimate::from_values(values, self.count, owner))
    }
}

pub fn estimate_fingerprint(images: &[Image], config: &DenoiserConfig, owner: Owner) -> Result<FingerprintEstimate> {
    let first = images
        .first()
        .ok_or_else(|| Error::param("fingerprint estimate needs at least one image"))?;
    for img in images {
        check_same_dims(first.dims(), img.dims(), "estimate_fingerprint")?;
    }
    let residuals: Vec<_> = images
        .par_iter()
        .map(|img| {
            let intensity = img.to_f64();
            residual_matrix(&intensity, config).map(|w| (intensity, w.values))
        })
        .collect::<Result<_>>()?;
    let mut acc = FingerprintAccumulator::new(first.dims());
    for (intensity, w) in &residuals {
        acc.add(intensity, w)?;
    }
    let mut estimate = acc.finish(owner)?;
    estimate.source_ids = images.iter().map(|i| i.id.clone()).collect();
    Ok(estimate)
}

/// Output of the correlation detector for one image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionScore {
    pub rho: f64,
}

/// `rho = corr(W_I, I * K)`.
pub fn attribution_score(
    image: &Image,
    fingerprint: &FingerprintEstimate,
    config: &DenoiserConfig,
) -> Result<AttributionScore> {
    let intensity = image.to_f64();
    let w = residual_matrix(&intensity, config)?;
    attribution_from_residual(&intensity, &w.values, fingerprint)
}

pub fn attribution_from_residual(
    intensity: &Array2<f64>,
    residual: &Array2<f64>,
    fingerprint: &FingerprintEstimate,
) -> Result<AttributionScore> {
    check_same_dims(intensity.dim(), fingerprint.dims(), "attribution_score")?;
    let expected = intensity * &fingerprint.values;
    Ok(AttributionScore {
        rho: normalized_correlation(residual, &expected)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn single_term_arithmetic() {
        let mut acc = FingerprintAccumulator::new((1, 1));
        acc.add(&arr2(&[[2.0]]), &arr2(&[[4.0]])).unwrap();
        let k = acc.finish(Owner::Eve).unwrap();
        let want = 8.0 / (4.0 + 4.0 * DEFAULT_GUARD_SCALE);
        assert_eq!(k.values[[0, 0]], want);
        assert!((k.values[[0, 0]] - 2.0).abs() < 1e-8);
        assert_eq!(k.n_images, 1);
    }

    #[test]
    fn dark_pixels_do_not_divide_by_zero() {
        let mut acc = FingerprintAccumulator::new((1, 2));
        acc.add(&arr2(&[[0.0, 3.0]]), &arr2(&[[0.0, 0.3]])).unwrap();
        let k = acc.finish(Owner::Alice).unwrap();
        assert_eq!(k.values[[0, 0]], 0.0);
        assert!(k.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(FingerprintAccumulator::new((2, 2)).finish(Owner::Eve).is_err());
        assert!(estimate_fingerprint(&[], &DenoiserConfig::default(), Owner::Eve).is_err());
        let a = Image::new("a", Array2::from_elem((16, 16), 5u8));
        let b = Image::new("b", Array2::from_elem((16, 17), 5u8));
        assert!(estimate_fingerprint(&[a, b], &DenoiserConfig::default(), Owner::Eve).is_err());
    }

    #[test]
    fn zero_fingerprint_is_degenerate() {
        let img = Image::new(
            "x",
            Array2::from_shape_fn((32, 32), |(r, c)| ((r * 7 + c * 13) % 200) as u8),
        );
        let fp = FingerprintEstimate::from_values(Array2::zeros((32, 32)), 1, Owner::Alice);
        assert!(matches!(
            attribution_score(&img, &fp, &DenoiserConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
