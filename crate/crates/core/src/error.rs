use thiserror::Error;

/// Errors produced by matrix operations and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowRankError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid data: expected {expected} entries, got {got}")]
    InvalidData { expected: usize, got: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("product of shape {rows}x{cols} exceeds the size cap of {cap} entries")]
    OverflowGuard { rows: usize, cols: usize, cap: usize },

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("k-rank of {cols} columns exceeds the brute-force cap of {cap}")]
    TooManyColumns { cols: usize, cap: usize },

    #[error("normal equations are numerically singular")]
    SingularNormalEquations,

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("empty observation set with zero regularization")]
    EmptyObservation,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("divergence detected at iteration {iter}: loss {loss:e} exceeds {limit:e}")]
    DivergenceDetected { iter: usize, loss: f64, limit: f64 },

    #[error("adapter shape algebra: {0}")]
    ShapeAlgebraError(String),
}

pub type Result<T> = std::result::Result<T, LowRankError>;
