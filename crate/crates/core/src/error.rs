use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("camera file has {0} tokens, expected 22")]
    CameraTokenCount(usize),
    #[error("rank-deficient patch matrix (condition number {0:e})")]
    RankDeficient(f64),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::MissingFile(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
