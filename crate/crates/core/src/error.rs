use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch { context: &'static str, expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dictionary column {column} sums to {sum:e}; cannot rescale to unit sum")]
    DegenerateColumn { column: usize, sum: f64 },

    #[error("singular linear system in {context}{hint}")]
    Singular { context: &'static str, hint: &'static str },

    #[error("solver diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("label {label} of sample {index} is outside [0, {classes})")]
    InvalidLabel { index: usize, label: usize, classes: usize },

    #[error("class {class} has {available} samples but {required} are required")]
    InsufficientClass { class: usize, available: usize, required: usize },

    #[error("model carries no classifier")]
    NoClassifier,

    #[error("empty matrix: {0}")]
    EmptyMatrix(String),

    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch { context, expected: expected.to_string(), actual: actual.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
