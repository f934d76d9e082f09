use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// PSNR is unbounded for identical images.
    #[error("identical images: PSNR is unbounded")]
    IdenticalImages,

    #[error("slanted-edge analysis failed: {0}")]
    Edge(String),

    #[error("curve never crosses half modulus")]
    NoCrossing,

    #[error("numerical fault in {context}: {detail}")]
    Numerical { context: String, detail: String },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("checkpoint does not match network (missing: [{}], extra: [{}])", missing.join(", "), extra.join(", "))]
    CheckpointMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical { context: context.into(), detail: detail.into() }
    }

    /// True for NaN/Inf style faults raised during optimization or training.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}
