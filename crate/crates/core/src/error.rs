use std::path::PathBuf;

use crate::domain::SensitiveGroup;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("group {0} has no examples")]
    EmptyGroup(SensitiveGroup),

    #[error("group {0} contains only one label value")]
    DegenerateLabels(SensitiveGroup),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("{name} = {value} is outside the admissible range {range}")]
    TargetOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("targets induce a degenerate positive rate ({reason})")]
    DegenerateTarget { reason: String },

    #[error("loss or gradient requested for an empty batch")]
    EmptyBatch,

    #[error("non-finite training loss at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("model was trained with the sensitive attribute as input but none was given")]
    MissingSensitive,

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("input lengths differ ({0})")]
    LengthMismatch(String),

    #[error("cannot aggregate an empty list of reports")]
    Empty,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("no rows left after dropping missing values and filtered rows")]
    EmptyAfterFiltering,

    #[error("split produced an invalid partition: {0}")]
    DegenerateSplit(Box<Error>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::TargetOutOfRange { .. }
            | Error::DegenerateTarget { .. }
            | Error::InvalidConfig(_)
            | Error::FormatVersion { .. }
            | Error::Json(_) => ErrorClass::Config,
            Error::NonFinite { .. } | Error::EmptyBatch | Error::Empty => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
