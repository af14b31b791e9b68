//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by the model, kernels, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix dimensions do not match the expected shape.
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: String,
        found: String,
    },

    /// A cell or user index lies outside the configured network.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Matrix is too far from Hermitian to symmetrize silently.
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// A positive-definite factorization failed.
    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    /// A transmit strategy violates the feasible set.
    #[error("infeasible transmit strategy: {0}")]
    Infeasible(String),

    /// A numerical routine produced non-finite or inconsistent values.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
