use thiserror::Error;

/// Errors raised by the numerical kernels, instance builders and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular triangular matrix: zero pivot at index {index}")]
    SingularTriangular { index: usize },

    #[error("matrix is not symmetric (max |S[i][j] - S[j][i]| = {deviation:e})")]
    NotSymmetric { deviation: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("coordinate {index} has zero curvature")]
    SingularCoordinate { index: usize },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("non-finite iterate after {epochs} epochs")]
    Divergence { epochs: usize },

    #[error("enumeration requested for n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("eigenvalue iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
