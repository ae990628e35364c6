//! Eve's fingerprint-copy attack `J' = [J (1 + alpha K_E)]` and the search for
//! the weakest strength that still fools the correlation detector.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, quantize_pixel, Image, Role};
use crate::prnu_core::{
    attribution_from_residual, residual_matrix, DenoiserConfig, DetectorCalibration, FingerprintEstimate,
};

/// Bisection bounds for [`minimum_alpha`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    pub alpha_max: f64,
    pub tolerance: f64,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        AlphaSearch {
            alpha_max: 4.0,
            tolerance: 1e-4,
        }
    }
}

impl AlphaSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_max > 0.0 && self.alpha_max.is_finite()) {
            return Err(Error::param(format!("alpha_max must be > 0, got {}", self.alpha_max)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub forged: Image,
    pub alpha: f64,
    pub rho_achieved: f64,
    pub n_source_images: usize,
    pub source_ids: Vec<String>,
}

/// The serializable part of an [`AttackResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub image_id: String,
    pub forged_id: String,
    pub alpha: f64,
    pub rho: f64,
    pub n_sources: usize,
    pub source_ids: Vec<String>,
}

impl AttackResult {
    pub fn record(&self, image_id: &str) -> AttackRecord {
        AttackRecord {
            image_id: image_id.to_string(),
            forged_id: self.forged.id.clone(),
            alpha: self.alpha,
            rho: self.rho_achieved,
            n_sources: self.n_source_images,
            source_ids: self.source_ids.clone(),
        }
    }
}

/// Unquantized implant: `J (1 + alpha K)`.
pub fn implant_values(j: &Image, k_e: &FingerprintEstimate, alpha: f64) -> Result<Array2<f64>> {
    check_same_dims(j.dims(), k_e.dims(), "implant_fingerprint")?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut out = j.to_f64();
    ndarray::Zip::from(&mut out)
        .and(&k_e.values)
        .for_each(|p, &k| *p *= 1.0 + alpha * k);
    Ok(out)
}

/// Scale, clip to [0, 255], round half away from zero.
pub fn implant_fingerprint(j: &Image, k_e: &FingerprintEstimate, alpha: f64) -> Result<Image> {
    let values = implant_values(j, k_e, alpha)?;
    Ok(Image {
        id: format!("{}-forged", j.id),
        pixels: values.mapv(quantize_pixel),
        source_id: j.source_id.clone(),
        role: Some(Role::Forged),
    })
}

fn forged_score(
    j: &Image,
    k_e: &FingerprintEstimate,
    alpha: f64,
    alice: &FingerprintEstimate,
    denoiser: &DenoiserConfig,
) -> Result<(Image, f64)> {
    let forged = implant_fingerprint(j, k_e, alpha)?;
    let intensity = forged.to_f64();
    let w = residual_matrix(&intensity, denoiser)?;
    let rho = attribution_from_residual(&intensity, &w.values, alice)?.rho;
    Ok((forged, rho))
}

/// Smallest `alpha` (within `search.tolerance`) whose forgery passes Alice's detector.
///
/// Rounding makes the pass/fail predicate only approximately monotone in `alpha`;
/// the upper bisection bracket is only ever moved onto an evaluated passing point,
/// so the returned strength is always one that was seen to pass.
pub fn minimum_alpha(
    j: &Image,
    k_e: &FingerprintEstimate,
    alice: &FingerprintEstimate,
    calibration: &DetectorCalibration,
    search: &AlphaSearch,
    denoiser: &DenoiserConfig,
) -> Result<AttackResult> {
    search.validate()?;
    check_same_dims(j.dims(), alice.dims(), "minimum_alpha")?;

    let (mut best_image, mut best_rho) = forged_score(j, k_e, search.alpha_max, alice, denoiser)?;
    if !calibration.attributes(best_rho) {
        return Err(Error::AttackInfeasible {
            alpha_max: search.alpha_max,
            rho_at_max: best_rho,
            threshold: calibration.threshold,
        });
    }
    let (mut lo, mut hi) = (0.0, search.alpha_max);
    while hi - lo > search.tolerance {
        let mid = 0.5 * (lo + hi);
        let (img, rho) = forged_score(j, k_e, mid, alice, denoiser)?;
        if calibration.attributes(rho) {
            hi = mid;
            best_image = img;
            best_rho = rho;
        } else {
            lo = mid;
        }
    }
    // Re-verify the stored forgery against the detector before handing it out.
    let intensity = best_image.to_f64();
    let w = residual_matrix(&intensity, denoiser)?;
    let rho = attribution_from_residual(&intensity, &w.values, alice)?.rho;
    debug_assert_eq!(rho, best_rho);
    if !calibration.attributes(rho) {
        return Err(Error::AttackInfeasible {
            alpha_max: search.alpha_max,
            rho_at_max: rho,
            threshold: calibration.threshold,
        });
    }
    Ok(AttackResult {
        forged: best_image,
        alpha: hi,
        rho_achieved: rho,
        n_source_images: k_e.n_images,
        source_ids: k_e.source_ids.clone(),
    })
}
