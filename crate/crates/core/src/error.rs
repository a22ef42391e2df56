use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain is not representable on the initial grid: {0}")]
    InvalidDomain(String),
    #[error("boundary tags are not consistent: {0}")]
    InvalidBoundary(String),
    #[error("element {0} is not an active element")]
    InactiveElement(usize),
    #[error("lattice resolution exhausted while splitting element {0}")]
    LatticeExhausted(usize),
    #[error("mesh condition violated: {0}")]
    MeshCondition(String),
    #[error("stiffness matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
