use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index ({row}, {col}) out of range for a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (smallest eigenvalue {min:e}, largest {max:e})")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("degenerate increments: {0}")]
    Degenerate(String),

    #[error("moment generating function overflow: exponent {0} exceeds the safe range")]
    MgfOverflow(f64),

    #[error("resource budget exceeded: {needed} cells needed, limit {limit}")]
    BudgetExceeded { needed: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
