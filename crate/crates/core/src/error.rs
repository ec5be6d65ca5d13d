use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid activation parameters: {0}")]
    InvalidActivation(String),

    #[error("invalid convolution spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("regularizer must be a non-negative finite number, got {0}")]
    NegativeRegularizer(f64),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed model file{}: {field}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    MalformedModelFile {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("channel `{0}` not present in time series")]
    ChannelMissing(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
