use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("graph is disconnected: {0}")]
    Disconnected(String),
    #[error("invalid mixing matrix: {0}")]
    Mixing(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("action out of range: {0}")]
    ActionOutOfRange(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("enumeration too large: {paths} trajectories exceed the limit of {limit}")]
    EnumerationTooLarge { paths: f64, limit: f64 },
    #[error("invalid tabular MDP: {0}")]
    Tabular(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("configs are not comparable: {0}")]
    Incomparable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
