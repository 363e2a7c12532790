use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("metric not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("metric not Hermitian: {0}")]
    NotHermitian(String),
    #[error("differential does not square to zero at degree {degree}: max entry {value:e}")]
    NotAComplex { degree: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sequence is not exact: betti numbers {0:?}")]
    NotExact(Vec<usize>),
    #[error("quadrature did not converge (last change {change:e}, smallest nonzero eigenvalue {lambda_min:e})")]
    Quadrature { change: f64, lambda_min: f64 },
    #[error("cohomology rank jumps over the base grid: {0}")]
    JumpingCohomology(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
