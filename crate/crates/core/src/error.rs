use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the labeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PGM {path}: {reason}")]
    Pgm { path: PathBuf, reason: String },

    #[error("CSV error in {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("no files matching {pattern:?} in {dir}")]
    EmptyDirectory { dir: PathBuf, pattern: String },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{what} has no temporal overlap with the frame range")]
    NoOverlap { what: &'static str },

    #[error("{what} has a gap of {gap_s:.3} s (limit {limit_s:.3} s) near t={at:.3} s")]
    SensorGap {
        what: &'static str,
        gap_s: f64,
        limit_s: f64,
        at: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
