//! The five data splits of an experiment, synthesized or loaded from a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Role};
use crate::io::manifest::{Manifest, ManifestEntry, FILE_NAME};
use crate::io::{matrix, pgm};
use crate::seeding::{derive_seed, stream_rng, Stream};
use crate::sensor_sim::{
    generate_content, render_image, CameraProfile, ContentSpec, DEFAULT_SIGMA_K, DEFAULT_THETA_SIGMA,
};

/// Parameters of a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    pub sigma_k: f64,
    pub theta_sigma: f64,
    /// Public set size N_c.
    pub n_public: usize,
    /// Private set 1, inference line and per-image deviation moments.
    pub n_line_fit: usize,
    /// Private set 2, detector calibration.
    pub n_calibration: usize,
    /// Private set 3, genuine H0 test images.
    pub n_reference: usize,
    /// Flat fields for Alice's fingerprint.
    pub n_flat: usize,
    /// Images from Eve's camera to be forged.
    pub n_attack_source: usize,
    pub content_radius: f64,
    /// Scene exposure is drawn uniformly from this range for every non-flat image.
    pub exposure_min: f64,
    pub exposure_max: f64,
    pub flat_level: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 256,
            cols: 256,
            sigma_k: DEFAULT_SIGMA_K,
            theta_sigma: DEFAULT_THETA_SIGMA,
            n_public: 200,
            n_line_fit: 300,
            n_calibration: 300,
            n_reference: 300,
            n_flat: 50,
            n_attack_source: 60,
            content_radius: 6.0,
            exposure_min: 0.35,
            exposure_max: 1.0,
            flat_level: 180.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param("image dims must be positive"));
        }
        for (n, what) in [
            (self.n_public, "n_public"),
            (self.n_line_fit, "n_line_fit"),
            (self.n_calibration, "n_calibration"),
            (self.n_reference, "n_reference"),
            (self.n_flat, "n_flat"),
            (self.n_attack_source, "n_attack_source"),
        ] {
            if n == 0 {
                return Err(Error::param(format!("{what} must be at least 1")));
            }
        }
        if self.n_line_fit < 3 {
            return Err(Error::param("n_line_fit must be at least 3"));
        }
        if !(0.0 < self.exposure_min && self.exposure_min <= self.exposure_max && self.exposure_max <= 1.0) {
            return Err(Error::param("exposure range must satisfy 0 < min <= max <= 1"));
        }
        if !(0.0..=255.0).contains(&self.flat_level) {
            return Err(Error::param("flat_level must be in [0, 255]"));
        }
        if !(self.sigma_k > 0.0 && self.theta_sigma >= 0.0 && self.content_radius > 0.0) {
            return Err(Error::param("sigma_k and content_radius must be > 0, theta_sigma >= 0"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Images grouped by role, plus ground-truth cameras when synthetic.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub dims: (usize, usize),
    pub splits: BTreeMap<Role, Vec<Image>>,
    pub cameras: Vec<CameraProfile>,
}

impl Dataset {
    pub fn split(&self, role: Role) -> &[Image] {
        self.splits.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Split hygiene: unique ids, consistent dims, role tags matching the split.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (role, images) in &self.splits {
            for img in images {
                if !seen.insert(img.id.as_str()) {
                    return Err(Error::Manifest(format!(
                        "image id `{}` appears in more than one place",
                        img.id
                    )));
                }
                if img.role != Some(*role) {
                    return Err(Error::Manifest(format!(
                        "image `{}` tagged {:?} but listed under {role}",
                        img.id, img.role
                    )));
                }
                if img.dims() != self.dims {
                    return Err(Error::Manifest(format!("image `{}` has wrong dims", img.id)));
                }
            }
        }
        for role in [
            Role::Public,
            Role::LineFit,
            Role::Calibration,
            Role::Reference,
            Role::FlatField,
        ] {
            if self.split(role).is_empty() {
                return Err(Error::Manifest(format!("split `{role}` is empty")));
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::read(&dir.join(FILE_NAME))?;
        let mut ds = Dataset::default();
        for role in Role::ALL {
            let imgs = manifest.load_role(dir, role)?;
            if !imgs.is_empty() {
                ds.splits.insert(role, imgs);
            }
        }
        ds.dims = match manifest.dims {
            Some(d) => d,
            None => ds
                .splits
                .values()
                .flatten()
                .next()
                .map(Image::dims)
                .ok_or_else(|| Error::Manifest("manifest lists no images".into()))?,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes PGMs, ground-truth PRNU matrices and the manifest under `dir`.
    pub fn save(&self, dir: &Path) -> Result<Manifest> {
        let mut manifest = Manifest {
            dims: Some(self.dims),
            ..Manifest::default()
        };
        for cam in &self.cameras {
            let rel = PathBuf::from("truth").join(format!("{}.prnumat", cam.id));
            matrix::write(&dir.join(&rel), &cam.prnu)?;
            manifest.cameras.push((cam.id.clone(), rel));
        }
        for (role, images) in &self.splits {
            for img in images {
                let rel = PathBuf::from("images").join(format!("{}.pgm", img.id));
                pgm::write(&dir.join(&rel), img)?;
                manifest.entries.push(ManifestEntry {
                    role: *role,
                    id: img.id.clone(),
                    path: rel,
                    source: img.source_id.clone(),
                });
            }
        }
        manifest.write(&dir.join(FILE_NAME))?;
        Ok(manifest)
    }
}

fn id_prefix(role: Role) -> &'static str {
    match role {
        Role::Public => "pub",
        Role::LineFit => "line",
        Role::Calibration => "cal",
        Role::Reference => "ref",
        Role::FlatField => "flat",
        Role::AttackSource => "src",
        Role::Forged => "forged",
    }
}

/// Renders one image; every random choice is keyed by `(seed, index)`.
fn render_one(cfg: &SynthConfig, camera: &CameraProfile, flat: bool, seed: u64, index: u64) -> Result<Image> {
    let spec = if flat {
        ContentSpec::Flat { level: cfg.flat_level }
    } else {
        ContentSpec::SmoothRandom {
            radius: cfg.content_radius,
        }
    };
    let mut content = generate_content(cfg.dims(), &spec, derive_seed(seed, Stream::Content, index))?;
    if !flat {
        let mut rng = stream_rng(seed, Stream::Content, index ^ 0x5555_0000_0000_0000);
        let exposure = rng.random_range(cfg.exposure_min..=cfg.exposure_max);
        content = content.exposed(exposure)?;
    }
    render_image(camera, &content, derive_seed(seed, Stream::SensorNoise, index))
}

/// Alice's camera `c1` renders every split except the attack sources, which come from Eve's `c2`.
pub fn synthesize(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let c1 = CameraProfile::new(
        "c1",
        cfg.dims(),
        cfg.sigma_k,
        cfg.theta_sigma,
        derive_seed(seed, Stream::Camera, 1),
    )?;
    let c2 = CameraProfile::new(
        "c2",
        cfg.dims(),
        cfg.sigma_k,
        cfg.theta_sigma,
        derive_seed(seed, Stream::Camera, 2),
    )?;
    let plan = [
        (Role::Public, cfg.n_public),
        (Role::LineFit, cfg.n_line_fit),
        (Role::Calibration, cfg.n_calibration),
        (Role::Reference, cfg.n_reference),
        (Role::FlatField, cfg.n_flat),
        (Role::AttackSource, cfg.n_attack_source),
    ];
    let mut jobs = Vec::new();
    let mut index = 0u64;
    for (role, n) in plan {
        for i in 0..n {
            jobs.push((role, i, index));
            index += 1;
        }
    }
    let rendered: Vec<Image> = jobs
        .par_iter()
        .map(|&(role, i, index)| {
            let cam = if role == Role::AttackSource { &c2 } else { &c1 };
            let mut img = render_one(cfg, cam, role == Role::FlatField, seed, index)?;
            img.id = format!("{}-{i:04}", id_prefix(role));
            Ok(img.with_role(role))
        })
        .collect::<Result<_>>()?;
    let mut splits: BTreeMap<Role, Vec<Image>> = BTreeMap::new();
    for img in rendered {
        splits.entry(img.role.unwrap()).or_default().push(img);
    }
    Ok(Dataset {
        dims: cfg.dims(),
        splits,
        cameras: vec![c1, c2],
    })
}
