//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or unsupported image file content.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration file or override problem (unknown/missing key, bad value).
    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Incompatible curvelet geometry (wrong size, scales, or coefficient layout).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A solver update produced a non-finite value.
    #[error("numeric failure in {subproblem}-update at iteration {iteration}")]
    Numeric {
        subproblem: &'static str,
        iteration: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
