use std::path::PathBuf;

/// Errors raised by the library.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input makes the requested quantity undefined (zero norm, zero spread).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The fingerprint-copy attack cannot reach the detector threshold.
    #[error("attack infeasible: rho {rho_at_max:.6} at alpha_max {alpha_max} stays below threshold {threshold:.6}")]
    AttackInfeasible {
        alpha_max: f64,
        rho_at_max: f64,
        threshold: f64,
    },

    /// The H0 reference statistic has zero spread, so no p-value can be formed.
    #[error("degenerate H0 model: {0}")]
    DegenerateH0(String),

    /// Dataset splits violate role or hygiene constraints.
    #[error("manifest error: {0}")]
    Manifest(String),

    /// A file could not be decoded.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// An input produced by an earlier pipeline step is missing.
    #[error("{} not found; run `prnu-triangle {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
