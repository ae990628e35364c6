//! Command-line front end. Every subcommand works inside one experiment
//! directory (`--out`), reading what earlier steps left there:
//!
//! ```text
//! synthesize  -> manifest.txt, images/, truth/
//! calibrate   -> alice.prnumat, calibration.json
//! fit-line    -> line.json, line_pairs.csv
//! attack      -> n<N>/eve.prnumat, n<N>/forged/, n<N>/attack_manifest.csv
//! test        -> verdicts.jsonl (also streamed to stdout)
//! experiment  -> all of the above plus report.json and sweep.csv
//! ```

mod commands;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;

pub use commands::{cmd_attack, cmd_calibrate, cmd_experiment, cmd_fit_line, cmd_synthesize, cmd_test};

#[derive(Parser, Debug)]
#[command(
    name = "prnu-triangle",
    version,
    about = "PRNU fingerprint-copy attack and pooled triangle test"
)]
pub struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Experiment directory.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic dataset with all splits.
    Synthesize,
    /// Estimate Alice's fingerprint and calibrate the detector threshold.
    Calibrate,
    /// Fit the inference line on the line-fit split.
    FitLine,
    /// Forge every attack-source image with Eve's fingerprint.
    Attack {
        /// Only this N instead of the configured sweep.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the pooled triangle test on images.
    Test {
        /// PGM files to test; by default all reference and forged images.
        #[arg(long = "image")]
        images: Vec<PathBuf>,
    },
    /// Run the whole protocol and write a consolidated report.
    Experiment,
}

/// Loads the `--config` file (or the defaults) and applies the seed override.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::format(p, e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.dataset.validate()?;
    cfg.validate_for(cfg.dataset.n_public)?;
    Ok(cfg)
}

/// How a subcommand finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some images failed; the rest were processed and written.
    Partial,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Complete) => EXIT_OK,
        Ok(Outcome::Partial) => EXIT_PARTIAL,
        Err(Error::Io { .. }) => EXIT_IO,
        Err(_) => EXIT_VALIDATION,
    }
}

/// Runs a parsed command line inside its own worker pool.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    let out = cli.out.as_path();
    pool.install(|| match &cli.command {
        Command::Synthesize => cmd_synthesize(&cfg, out),
        Command::Calibrate => cmd_calibrate(&cfg, out),
        Command::FitLine => cmd_fit_line(&cfg, out),
        Command::Attack { n } => cmd_attack(&cfg, out, *n),
        Command::Test { images } => cmd_test(&cfg, out, images, &mut std::io::stdout()),
        Command::Experiment => cmd_experiment(&cfg, out, &mut std::io::stdout()),
    })
}
