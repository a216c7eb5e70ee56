use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: i64 },
    #[error("column {0} has zero total count")]
    ZeroColumn(usize),
    #[error("column {col} sums to {sum}, expected 1")]
    NotStochastic { col: usize, sum: f64 },
    #[error("entry at row {row}, column {col} is negative or not finite: {value}")]
    InvalidProbability { row: usize, col: usize, value: f64 },
    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("label {label} at position {index} is not below K = {k}")]
    LabelOutOfRange { index: usize, label: usize, k: usize },
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("model has K = {0}; at least 2 clusters are needed to merge")]
    KTooSmall(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("dimension d = {0} is below the minimum of 20")]
    DTooSmall(usize),
    #[error("groups do not partition the vertex set: {0}")]
    InvalidPartition(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
