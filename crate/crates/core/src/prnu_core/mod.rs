//! Noise residuals, PRNU estimation, correlation and camera attribution.

pub mod correlation;
pub mod denoise;
pub mod detector;
pub mod filters;
pub mod fingerprint;
pub mod wavelet;

pub use correlation::{normalized_correlation, UnitVector};
pub use denoise::{denoise, denoise_matrix, residual, residual_matrix, DenoiserConfig, NoiseResidual};
pub use detector::{calibrate_threshold, DetectorCalibration};
pub use fingerprint::{
    attribution_from_residual, attribution_score, estimate_fingerprint, AttributionScore, FingerprintAccumulator,
    FingerprintEstimate, Owner,
};
