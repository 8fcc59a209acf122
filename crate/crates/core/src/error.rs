use thiserror::Error;

/// Errors raised by the channel toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Kraus operators violate the closure relation (max residual {0:e})")]
    ClosureViolation(f64),

    #[error("invalid Choi matrix: {0}")]
    InvalidChoi(String),

    #[error("not a completely positive map: eigenvalue {0:e} below tolerance")]
    NegativeEigenvalue(f64),

    #[error("only square (d -> d) channels are supported, got {d_in} -> {d_out}")]
    RectangularChannel { d_in: usize, d_out: usize },

    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("Kraus operator {alpha} has rank {rank}, exceeding k = {k}")]
    RankExceeded { alpha: usize, rank: usize, k: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("protocol output deviates from the target channel (max residual {0:e})")]
    Verification(f64),

    #[error("random generator failed: {0}")]
    Sampling(String),
}

pub type Result<T> = std::result::Result<T, Error>;
