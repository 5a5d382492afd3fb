use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "controller placement failed after {attempts} attempts ({placed} of {requested} placed); deployment too dense"
    )]
    PlacementFailure {
        attempts: usize,
        placed: usize,
        requested: usize,
    },

    #[error("snapshot {index}: {source}")]
    AtSnapshot {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("feature graph must be normalized with the model's normalizer before inference")]
    NotNormalized,

    #[error("feature graph is already normalized; normalizers apply to raw features only")]
    AlreadyNormalized,

    #[error("variant mismatch: model is {model}, input is {input}")]
    VariantMismatch { model: String, input: String },

    #[error("forward trace does not match this model or graph: {0}")]
    StaleTrace(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("grid oracle supports at most 3 subnetworks, got {0}")]
    OracleTooLarge(usize),

    #[error("record sets cover different snapshots")]
    SnapshotMismatch,

    #[error("unsupported {kind} format version {found} (this build reads version {expected})")]
    UnsupportedVersion {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("malformed {kind} file: {detail}")]
    Format { kind: &'static str, detail: String },

    #[error("refusing to overwrite existing {0} (use force)")]
    WouldOverwrite(PathBuf),

    #[error("missing {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_snapshot(self, index: usize) -> Self {
        Error::AtSnapshot {
            index,
            source: Box::new(self),
        }
    }
}
