use thiserror::Error;

/// Errors raised by the roughpath library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time grid needs at least two points, got {0}")]
    GridTooShort(usize),
    #[error("time grid is not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("non-finite grid time at index {0}")]
    NonFiniteTime(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operands live on different time grids")]
    GridMismatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sewing needs a germ exponent z > 1, got {0}")]
    ExponentTooSmall(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("Chen relation violated: defect {defect:e} exceeds tolerance {tolerance:e}")]
    ChenViolation { defect: f64, tolerance: f64 },
    #[error("multiplicative defect {defect:e} exceeds tolerance {tolerance:e}")]
    NotMultiplicative { defect: f64, tolerance: f64 },
    #[error("non-finite value at step {step}, state {state:?}")]
    NonFinite { step: usize, state: Vec<f64> },
    #[error(
        "Picard iteration failed on window starting at index {start} (width {width} cells); \
         last distances {distances:?}"
    )]
    PicardFailure {
        start: usize,
        width: usize,
        distances: Vec<f64>,
    },
    #[error("refinement did not converge, Cauchy differences {0:?}")]
    NonConvergence(Vec<f64>),
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
