use thiserror::Error;

/// Errors raised by the geometry, projection, iteration and spectral layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parameters (alpha={alpha}, alpha1={alpha1}, alpha2={alpha2}) satisfy none of the admissible cases")]
    InvalidParams { alpha: f64, alpha1: f64, alpha2: f64 },

    #[error("projection solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("projection is not unique: {0}")]
    Singularity(String),

    #[error("degenerate manifold: {0}")]
    DegenerateManifold(String),

    #[error("boundary is not smooth at the query point: {0}")]
    NonsmoothPoint(String),

    #[error("insufficient data for a rate fit: {usable} usable iterates, need {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("operator is not convergent: spectral radius {radius}")]
    NotConvergent { radius: f64 },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("boundary tangents coincide; regularity constants are undefined")]
    TangentCase,

    #[error("no valid samples: {0}")]
    NoValidSamples(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T, E = GapError> = std::result::Result<T, E>;
