use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty factor list")]
    EmptyFactors,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("basis mismatch: {0} vs {1}")]
    BasisMismatch(String, String),
    #[error("positivity violated at step {step}: min eigenvalue {min_eig:.3e}")]
    Positivity { step: usize, min_eig: f64 },
    #[error("measurement outcome has vanishing likelihood ({0:.3e})")]
    ZeroLikelihood(f64),
    #[error("operator does not commute with the basis symmetry (leak {0:.3e})")]
    ProjectionLeak(f64),
    #[error("state lies outside the symmetric span (residual norm {0:.3e})")]
    OutOfSpan(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid parameter `{key}`: {msg}")]
    InvalidParam { key: &'static str, msg: String },
    #[error("schedule does not match configuration: {0}")]
    ScheduleMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
