use thiserror::Error;

/// Errors produced by mesh construction, assembly, and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("singular matrix: pivot below threshold at step {0}")]
    SingularMatrix(usize),

    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    #[error("Krylov breakdown: Arnoldi normalization coefficient {0:.3e}")]
    Breakdown(f64),

    #[error("nonpositive diagonal entry {value:.3e} at row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error("size overflow: {0}")]
    Overflow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
