use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    OutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian at ({i},{j})")]
    NotHermitian { i: usize, j: usize },
    #[error("non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("root finder failed: {0}")]
    RootFind(String),
    #[error("linear algebra backend error: {0}")]
    Linalg(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("sde integration aborted: {0}")]
    SdeAbort(String),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
