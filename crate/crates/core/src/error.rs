use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (asymmetry {residual:.3e} exceeds {tolerance:.1e})")]
    SymmetryViolation { residual: f64, tolerance: f64 },

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("apparent acceleration is singular (free fall): |g e_z + a| = {0:.3e}")]
    FreeFallSingularity(f64),

    #[error("noisy unit-vector measurement collapsed to zero norm twice")]
    DegenerateMeasurement,

    #[error("thrust vector has zero magnitude")]
    ThrustSingularity,

    #[error("thrust direction is collinear with the desired yaw direction")]
    YawSingularity,

    #[error("reference vectors violate the non-collinearity assumption: {0}")]
    AssumptionViolation(String),

    #[error("simulation diverged at t = {t:.4} s: {what}")]
    Divergence { t: f64, what: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
