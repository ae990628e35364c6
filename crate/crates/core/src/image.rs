//! Grayscale 8-bit images and dataset role tags.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dataset split an image belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// Alice's images that anyone (including Eve) can download.
    Public,
    /// Private images used to fit the inference line and the per-image deviation moments.
    LineFit,
    /// Private images used to set the correlation detector threshold.
    Calibration,
    /// Private genuine images, passing the detector, that stand for H0.
    Reference,
    /// Flat-field frames for Alice's fingerprint.
    FlatField,
    /// Images from Eve's own camera, to be forged.
    AttackSource,
    /// Output of the fingerprint-copy attack.
    Forged,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Public,
        Role::LineFit,
        Role::Calibration,
        Role::Reference,
        Role::FlatField,
        Role::AttackSource,
        Role::Forged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Public => "public",
            Role::LineFit => "line-fit",
            Role::Calibration => "calibration",
            Role::Reference => "reference",
            Role::FlatField => "flat-field",
            Role::AttackSource => "attack-source",
            Role::Forged => "forged",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown role tag `{s}`")))
    }
}

/// An 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub id: String,
    pub pixels: Array2<u8>,
    pub source_id: Option<String>,
    pub role: Option<Role>,
}

impl Image {
    pub fn new(id: impl Into<String>, pixels: Array2<u8>) -> Self {
        Image {
            id: id.into(),
            pixels,
            source_id: None,
            role: None,
        }
    }

    /// Builds an image from real intensities, rounding half away from zero after
    /// clipping to [0, 255].
    pub fn quantize(id: impl Into<String>, values: &Array2<f64>) -> Self {
        Image::new(id, values.mapv(quantize_pixel))
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.pixels.mapv(f64::from)
    }
}

/// Clip to [0, 255] then round half away from zero.
pub fn quantize_pixel(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

pub(crate) fn check_same_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::param(format!(
            "{what}: dimension mismatch {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_clips_then_rounds() {
        assert_eq!(quantize_pixel(-3.0), 0);
        assert_eq!(quantize_pixel(300.0), 255);
        assert_eq!(quantize_pixel(104.5), 105);
        assert_eq!(quantize_pixel(104.49), 104);
        assert_eq!(quantize_pixel(254.6), 255);
    }

    #[test]
    fn role_tags_round_trip() {
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
        }
        assert!("eve".parse::<Role>().is_err());
    }
}
