use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance factorization failed (last jitter tried: {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("Newton iterations did not converge after {iterations} steps (last step norms: {trace:?})")]
    NotConverged { iterations: usize, trace: Vec<f64> },

    #[error("intensity overflow at cell {cell}")]
    Overflow { cell: usize },

    #[error("enumeration requires {required} subsets, cap is {cap}")]
    EnumerationCap { required: u128, cap: u64 },

    #[error("requested {requested} sensors but only {available} candidates")]
    TooManySensors { requested: usize, available: usize },

    #[error("duplicate cell {0} in placement")]
    DuplicateCell(usize),

    #[error("missing required column {0}")]
    MissingColumn(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
