use thiserror::Error;

/// Errors produced by the solvers, transforms and file loaders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input at `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("operation `{0}` is not supported for this problem")]
    Unsupported(&'static str),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large: n = {n} exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
}

impl SolverError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SolverError::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
