use thiserror::Error;

/// Errors produced by the invariant and eigenvalue computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("degenerate lattice: basis determinant is {0}")]
    DegenerateLattice(f64),

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("operator has a kernel; no positive first eigenvalue")]
    Kernel,

    #[error("invalid neck: {0}")]
    InvalidNeck(String),

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
