//! Alice's side of the protocol: everything she prepares once before testing
//! images, and the per-image examination against the public candidate set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Role};
use crate::prnu_core::{
    attribution_score, calibrate_threshold, estimate_fingerprint, DenoiserConfig, DetectorCalibration,
    FingerprintEstimate, Owner,
};
use crate::triangle::{
    all_pairs, deviations_from_probes, estimate_moments_values, fit_inference_line, CorrelationPair, DeviationMoments,
    DeviationSet, InferenceLine, MomentEstimator, PooledStatistics, Probe,
};

/// Probes for `images`, failing on the first image that cannot be probed.
pub fn probe_all(images: &[Image], k_a: &FingerprintEstimate, config: &DenoiserConfig) -> Result<Vec<Probe>> {
    Probe::build_all(images, k_a, config).into_iter().collect()
}

/// Alice's fingerprint from flat fields plus the detector threshold from her
/// calibration images. `other_camera` only feeds the reported false-positive rate.
pub fn calibrate_alice(
    flats: &[Image],
    calibration: &[Image],
    other_camera: &[Image],
    config: &DenoiserConfig,
    target_tpr: f64,
) -> Result<(FingerprintEstimate, DetectorCalibration)> {
    let k_a = estimate_fingerprint(flats, config, Owner::Alice)?;
    let scores = |imgs: &[Image]| -> Result<Vec<f64>> {
        imgs.par_iter()
            .map(|i| attribution_score(i, &k_a, config).map(|s| s.rho))
            .collect()
    };
    let same = scores(calibration)?;
    let other = scores(other_camera)?;
    let cal = calibrate_threshold(&same, &other, target_tpr)?;
    Ok((k_a, cal))
}

/// The inference line over every pair of `images`.
pub fn fit_line_on(
    images: &[Image],
    k_a: &FingerprintEstimate,
    config: &DenoiserConfig,
) -> Result<(InferenceLine, Vec<CorrelationPair>, Vec<Probe>)> {
    let probes = probe_all(images, k_a, config)?;
    let pairs = all_pairs(&probes)?;
    let line = fit_inference_line(&pairs)?;
    Ok((line, pairs, probes))
}

/// Deviations and pooled statistics of one test image.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Examination {
    pub image_id: String,
    /// Attribution score against Alice's fingerprint.
    pub score: f64,
    pub deviations: DeviationSet,
    /// `mu_J` and `sigma_J`, taken from the deviations against the private moment references.
    pub moments: DeviationMoments,
    pub statistics: PooledStatistics,
}

/// Everything Alice needs to test images.
#[derive(Clone, Debug)]
pub struct Analyst {
    pub fingerprint: FingerprintEstimate,
    pub calibration: DetectorCalibration,
    pub line: InferenceLine,
    /// The public set, which Eve may have drawn from.
    pub candidates: Vec<Probe>,
    /// Private genuine images never exposed to Eve.
    pub moment_refs: Vec<Probe>,
    pub denoiser: DenoiserConfig,
    pub estimator: MomentEstimator,
}

impl Analyst {
    pub fn new(
        fingerprint: FingerprintEstimate,
        calibration: DetectorCalibration,
        line: InferenceLine,
        candidates: Vec<Probe>,
        moment_refs: Vec<Probe>,
        denoiser: DenoiserConfig,
        estimator: MomentEstimator,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::param("the candidate set is empty"));
        }
        if moment_refs.len() < 2 {
            return Err(Error::param("need at least 2 moment reference images"));
        }
        Ok(Analyst {
            fingerprint,
            calibration,
            line,
            candidates,
            moment_refs,
            denoiser,
            estimator,
        })
    }

    pub fn passes(&self, exam: &Examination) -> bool {
        self.calibration.attributes(exam.score)
    }

    pub fn examine(&self, image: &Image) -> Result<Examination> {
        let probe = Probe::new(image, &self.fingerprint, &self.denoiser)?;
        self.examine_probe(&probe)
    }

    /// An image never pairs with itself, so a test image that also sits in one of
    /// the sets is silently left out of it.
    pub fn examine_probe(&self, probe: &Probe) -> Result<Examination> {
        let others = |set: &[Probe]| -> Vec<Probe> { set.iter().filter(|p| p.id != probe.id).cloned().collect() };
        let refs = deviations_from_probes(probe, &others(&self.moment_refs), &self.line)?;
        let moments = estimate_moments_values(&refs.values(), self.estimator)?;
        let deviations = deviations_from_probes(probe, &others(&self.candidates), &self.line)?;
        if deviations.is_empty() {
            return Err(Error::param(format!("no usable candidates for `{}`", probe.id)));
        }
        let statistics = PooledStatistics::compute(&deviations, &moments);
        Ok(Examination {
            image_id: probe.id.clone(),
            score: probe.score,
            deviations,
            moments,
            statistics,
        })
    }

    /// Examinations in parallel; each image fails on its own.
    pub fn examine_all(&self, images: &[Image]) -> Vec<Result<Examination>> {
        images.par_iter().map(|img| self.examine(img)).collect()
    }

    /// Whether an image may serve as a genuine H0 reference.
    pub fn check_reference(&self, image: &Image) -> Result<()> {
        if matches!(image.role, Some(Role::Forged | Role::AttackSource)) {
            return Err(Error::param(format!(
                "`{}` is tagged {} and cannot be an H0 reference",
                image.id,
                image.role.map(|r| r.as_str()).unwrap_or_default()
            )));
        }
        if self.candidates.iter().any(|c| c.id == image.id) {
            return Err(Error::param(format!("reference `{}` is also a candidate", image.id)));
        }
        Ok(())
    }
}
