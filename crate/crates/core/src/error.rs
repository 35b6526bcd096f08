use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("no records")]
    NoRecords,
    #[error("duplicate cell ({model}, {dataset}, {metric})")]
    DuplicateCell {
        model: String,
        dataset: String,
        metric: String,
    },
    #[error("non-finite value at ({model}, {dataset}, {metric})")]
    NonFinite {
        model: String,
        dataset: String,
        metric: String,
    },
    #[error("unknown {kind} id(s): {ids}")]
    UnknownId { kind: &'static str, ids: String },
    #[error("missing {kind} id(s): {ids}")]
    MissingId { kind: &'static str, ids: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument {name}: {message}")]
    InvalidArgument { name: &'static str, message: String },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("sampler failure: {0}")]
    Sampler(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::NoRecords => "no_records",
            Error::DuplicateCell { .. } => "duplicate_cell",
            Error::NonFinite { .. } => "non_finite",
            Error::UnknownId { .. } => "unknown_id",
            Error::MissingId { .. } => "missing_id",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::InvalidTensor(_) => "invalid_tensor",
            Error::Sampler(_) => "sampler",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
