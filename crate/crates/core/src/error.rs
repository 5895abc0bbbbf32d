use thiserror::Error;

use crate::sparse::BasisTag;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration {config} is not in the sector C = {c0}")]
    NotInSector { config: String, c0: usize },

    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: BasisTag, found: BasisTag },

    #[error("operator is not Hermitian (max |H - H^dagger| = {0:e})")]
    NonHermitian(f64),

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("state is not normalized (norm = {0})")]
    Norm(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Krylov propagation broke down: {0}")]
    KrylovBreakdown(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("realization with seed {seed} failed: {source}")]
    Realization {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation at {params} failed: {source}")]
    Evaluation {
        params: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
