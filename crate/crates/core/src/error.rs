use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("population at capacity ({0} neurons)")]
    AtCapacity(usize),

    #[error("at least two live neurons are required, found {0}")]
    TooFewNeurons(usize),

    #[error("model has no neuron labels; run label assignment first")]
    Unlabeled,

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema mismatch in {}: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },

    #[error("unknown feature name: {0}")]
    UnknownFeature(String),

    #[error("class {class} has {count} records, need at least {needed}")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("class {0} appears in more than one task group")]
    OverlappingGroups(String),

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures map to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::UnknownFeature(_)
                | Error::OverlappingGroups(_)
                | Error::MissingFile(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
