use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: invalid field `{field}`: {reason}")]
    Record {
        line: usize,
        field: String,
        reason: String,
    },

    #[error("{rejected} row(s) rejected for out-of-range coordinates (first at line {first_line}, field `{field}`)")]
    OutOfRange {
        rejected: usize,
        first_line: usize,
        field: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("posts without a label: {}", .0.join(", "))]
    Unlabeled(Vec<String>),

    #[error("posts without a user id: {}", .0.join(", "))]
    MissingUser(Vec<String>),

    #[error("training corpus must contain both classes")]
    SingleClass,

    #[error("vocabulary is empty")]
    EmptyVocab,

    #[error("cannot build {folds} stratified folds: {reason}")]
    Stratification { folds: usize, reason: String },

    #[error("{0}")]
    Undefined(String),

    #[error("cell sets differ ({} cell(s) in symmetric difference)", .0.len())]
    CellMismatch(Vec<crate::grid::CellKey>),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(line: usize, field: &str, reason: impl Into<String>) -> Self {
        Error::Record {
            line,
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
