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

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    /// A scene, plan or configuration broke one of its invariants.
    #[error("validation failed for {entity}: {reason}")]
    Validation { entity: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("link has no propagation paths, no channel exists")]
    NoChannel,

    #[error("CIR window too short: covers up to {covered_s:e} s, needs {needed_s:e} s")]
    WindowTooShort { covered_s: f64, needed_s: f64 },

    #[error("CIR carries no sample above the noise floor")]
    Uninformative,

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl Error {
    pub(crate) fn validation(entity: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            entity: entity.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
