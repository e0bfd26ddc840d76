use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlcaError>;

#[derive(Debug, Error)]
pub enum PlcaError {
    #[error("index out of range: {what} = {index}, size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("negative value {value} at row {row}, column {col}")]
    NegativeValue { row: usize, col: usize, value: f64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid search space too large: {points} lattice evaluations (limit {limit})")]
    SearchSpaceTooLarge { points: u128, limit: u128 },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("empty input")]
    EmptyFile,

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PlcaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PlcaError::Io {
            path: path.into(),
            source,
        }
    }
}
