use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("metric tensor is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("tangent vectors are based at different configurations")]
    BaseMismatch,
    #[error("configurations are antipodal in angular coordinate {coord}")]
    OutOfNeighborhood { coord: usize },
    #[error("path has (near) zero length")]
    DegeneratePath,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no collision-free sample after {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
