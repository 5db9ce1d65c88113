use thiserror::Error;

/// Errors produced by the tensor, factorization and approximation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every mode must have size >= 1")]
    InvalidShape(Vec<usize>),

    #[error("data length {found} does not match shape product {expected}")]
    DataLength { expected: usize, found: usize },

    #[error("mode {mode} out of range for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("rank {rank} out of range (must be in 1..={max})")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("matrix has more columns ({cols}) than rows ({rows})")]
    WideMatrix { rows: usize, cols: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("non-finite values appeared in {0}")]
    Diverged(String),

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("tensor is identically zero")]
    ZeroTensor,

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("factor set violates its constraints: {0}")]
    InvalidFactors(String),

    #[error("could not reach incoherence {delta} for a {rows}x{cols} factor")]
    IncoherenceNotReached { delta: f64, rows: usize, cols: usize },

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
