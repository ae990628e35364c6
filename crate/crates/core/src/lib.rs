//! Fingerprint-copy attack and pooled triangle test for PRNU camera identification.
//!
//! The crate covers the whole loop on synthetic data:
//!
//! * [`sensor_sim`] renders images from cameras with a planted PRNU,
//! * [`prnu_core`] extracts noise residuals, estimates fingerprints and runs the
//!   correlation detector,
//! * [`attack`] forges a foreign image with an estimated fingerprint at the
//!   weakest strength that fools the detector,
//! * [`triangle`] computes the deviations from the inference line and the pooled
//!   statistics `L` (log-likelihood) and `V` (signed squared deviations),
//! * [`eval`] runs the two evaluation protocols (bootstrap over candidate subsets
//!   with Gaussian p-values, and ROC over test images) and full experiments,
//! * [`cli`] backs the `prnu-triangle` binary.
//!
//! See the `examples/` directory of the crate for one runnable program per capability.

pub mod attack;
pub mod cli;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod prnu_core;
pub mod seeding;
pub mod sensor_sim;
pub mod triangle;

pub use error::{Error, Result};
pub use image::{Image, Role};
