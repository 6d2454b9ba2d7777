use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid control field: {0}")]
    InvalidControl(String),

    #[error("invalid perturbation direction: {0}")]
    InvalidDirection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("operator is not positive definite (breakdown at iteration {iteration})")]
    Breakdown { iteration: usize },

    #[error("eigen iteration stagnated after {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },

    #[error("principal eigenvector changes sign ({negative} negative cells)")]
    Positivity { negative: usize },

    #[error("degenerate level set: {0}")]
    Degenerate(String),

    #[error("oracle limited to {max} cells, got {got}")]
    OracleScale { max: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
