//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any kinesynth module.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not conform for the requested operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A scalar argument is outside its legal range.
    #[error("invalid parameter {name}: {detail}")]
    Parameter { name: &'static str, detail: String },

    /// An integer label or class index is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A value violates its documented numeric range.
    #[error("value out of range: {0}")]
    Range(String),

    /// A file does not match the interchange schema.
    #[error("schema error{}: {detail}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Schema { line: Option<usize>, detail: String },

    /// A trial carried no samples.
    #[error("empty trial: {0}")]
    EmptyTrial(String),

    /// Stratified folding is impossible for the listed classes.
    #[error("cannot stratify into {n_folds} folds; deficient classes: {classes}")]
    Stratification { n_folds: usize, classes: String },

    /// Statistical input on which the requested test is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at {context}: {detail}")]
    NonFiniteLoss { context: String, detail: String },

    /// Model container or sidecar could not be decoded.
    #[error("model file error: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter { name, detail: detail.into() }
    }
}
