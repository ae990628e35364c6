//! Threshold calibration of the correlation detector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorCalibration {
    pub threshold: f64,
    pub target_tpr: f64,
    #[serde(rename = "n_same")]
    pub scores_used: usize,
    pub n_other: usize,
    /// Fraction of other-camera scores at or above the threshold.
    pub implied_fpr: Option<f64>,
}

impl DetectorCalibration {
    /// An image is attributed to the camera when `rho >= threshold`.
    pub fn attributes(&self, rho: f64) -> bool {
        rho >= self.threshold
    }

    pub fn empirical_tpr(&self, same_camera_scores: &[f64]) -> f64 {
        let pass = same_camera_scores.iter().filter(|&&s| self.attributes(s)).count();
        pass as f64 / same_camera_scores.len() as f64
    }
}

/// Linear-interpolation quantile of an ascending slice (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sets the threshold at the lower `(1 - target_tpr)` quantile of the same-camera scores.
pub fn calibrate_threshold(
    same_camera_scores: &[f64],
    other_camera_scores: &[f64],
    target_tpr: f64,
) -> Result<DetectorCalibration> {
    if same_camera_scores.is_empty() {
        return Err(Error::param("calibration needs at least one same-camera score"));
    }
    if !(target_tpr > 0.0 && target_tpr < 1.0) {
        return Err(Error::param(format!("target_tpr must be in (0, 1), got {target_tpr}")));
    }
    if same_camera_scores
        .iter()
        .chain(other_camera_scores)
        .any(|s| !s.is_finite())
    {
        return Err(Error::param("calibration scores must be finite"));
    }
    let mut sorted = same_camera_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = quantile_sorted(&sorted, 1.0 - target_tpr);
    let implied_fpr = (!other_camera_scores.is_empty()).then(|| {
        other_camera_scores.iter().filter(|&&s| s >= threshold).count() as f64 / other_camera_scores.len() as f64
    });
    Ok(DetectorCalibration {
        threshold,
        target_tpr,
        scores_used: same_camera_scores.len(),
        n_other: other_camera_scores.len(),
        implied_fpr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_scores_at_ninety_percent() {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let cal = calibrate_threshold(&scores, &[0.05, 0.5], 0.9).unwrap();
        assert!(cal.threshold >= 0.1 && cal.threshold <= 0.2);
        assert_eq!(scores.iter().filter(|&&s| cal.attributes(s)).count(), 9);
        assert_eq!(cal.implied_fpr, Some(0.5));
    }

    #[test]
    fn near_one_target_gives_minimum() {
        let scores = [0.4, 0.1, 0.3, 0.25];
        let cal = calibrate_threshold(&scores, &[], 1.0 - 1e-15).unwrap();
        assert!((cal.threshold - 0.1).abs() < 1e-12);
        assert_eq!(cal.implied_fpr, None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(calibrate_threshold(&[], &[0.1], 0.9).is_err());
        assert!(calibrate_threshold(&[0.1], &[], 1.0).is_err());
        assert!(calibrate_threshold(&[0.1], &[], 0.0).is_err());
    }

    #[test]
    fn tpr_invariant_holds_for_many_sizes() {
        for n in 1..60usize {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64).collect();
            for tpr in [0.5, 0.8, 0.9, 0.95] {
                let cal = calibrate_threshold(&scores, &[], tpr).unwrap();
                assert!(cal.empirical_tpr(&scores) >= tpr - 1.0 / n as f64);
            }
        }
    }
}
