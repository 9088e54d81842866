use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the ground filtering data path.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed binary data: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point outside the mapping domain: radius {radius} exceeds {limit}")]
    OutOfDomain { radius: f64, limit: f64 },

    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    #[error("training diverged at epoch {epoch}: last finite loss {last_finite_loss}")]
    Diverged { epoch: usize, last_finite_loss: f64 },

    #[error("point {0} received no prediction")]
    Uncovered(usize),

    #[error("not implemented: {0}")]
    NotImplemented(&'static str),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for I/O and data, 2 for configuration, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Format(_) | Error::Validation(_) => 1,
            Error::Config(_) | Error::NotImplemented(_) => 2,
            Error::OutOfDomain { .. }
            | Error::DegenerateSurface(_)
            | Error::LengthMismatch { .. }
            | Error::NonFinite { .. }
            | Error::Diverged { .. }
            | Error::Uncovered(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
