use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("division by zero at index {index} in {op}")]
    DivisionByZero { op: &'static str, index: usize },

    #[error("{op} requires nonnegative input, found {value} at index {index}")]
    NegativeEntry {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{op} requires strictly positive input, found {value} at index {index}")]
    NonPositiveEntry {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{op}: total sum must be strictly positive")]
    ZeroTotal { op: &'static str },

    #[error("accumulator has not been updated yet")]
    NotUpdated,

    #[error("parameters with {0} dimensions are not supported (only 1-D and 2-D)")]
    UnsupportedRank(usize),

    #[error("invalid hyperparameter `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("optimizer state is {state}, but {requested} step was requested")]
    VariantMismatch {
        state: &'static str,
        requested: &'static str,
    },

    #[error("expected {expected} parameter tensors, got {actual}")]
    ParamCount { expected: usize, actual: usize },

    #[error("manifest parse error on line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },

    #[error("manifest is empty")]
    EmptyManifest,
}
