//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by training, removal, and accounting operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An input value violates a loss-specific domain requirement
    /// (e.g. a logistic target that is not ±1).
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix/vector dimensions do not agree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A removal referenced a row that is out of range, already removed,
    /// or duplicated within the batch.
    #[error("stale index: {0}")]
    StaleIndex(String),

    /// A linear-algebra routine failed (non-positive-definite factorization,
    /// LAPACK error, or a solve residual above tolerance).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The optimizer exhausted its iteration cap before reaching the
    /// requested gradient tolerance. Carries the best iterate found.
    #[error(
        "optimizer did not reach gradient tolerance {grad_tol:.3e} within {iters} iterations \
         (best gradient norm {grad_norm:.3e})"
    )]
    Convergence {
        grad_tol: f64,
        grad_norm: f64,
        iters: usize,
        best_weights: Vec<f64>,
    },

    /// The operation is undefined for the given loss (e.g. the worst-case
    /// residual bound for a least-squares loss with no gradient-norm bound).
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
