use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants are grouped by the layer that raises them. The C interface maps
/// each variant onto a stable integer code (see `Error::code`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("exact-evaluation limit exceeded: {0}")]
    Limit(String),

    #[error("arrival out of sequence: expected index {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("invalid selection state: {0}")]
    State(String),

    #[error("need at least {need} candidates, got {got}")]
    Size { need: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parameter layouts differ")]
    LayoutMismatch,

    #[error("no parameter sets to aggregate")]
    EmptyList,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("infeasible partition: {0}")]
    Infeasible(String),

    #[error("flow at line {line} starts at {start} before the previous flow ({previous})")]
    OutOfOrder { line: usize, start: f64, previous: f64 },

    #[error("malformed record at line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("cell {cell}: {source}")]
    Cell { cell: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable numeric code, used as the return value of the C interface.
    pub fn code(&self) -> i32 {
        match self {
            Error::Domain(_) => 1,
            Error::Overflow(_) => 2,
            Error::Limit(_) => 3,
            Error::Sequencing { .. } => 4,
            Error::State(_) => 5,
            Error::Size { .. } => 6,
            Error::Shape(_) => 7,
            Error::EmptyDataset => 8,
            Error::LayoutMismatch => 9,
            Error::EmptyList => 10,
            Error::NonFinite { .. } => 11,
            Error::Infeasible(_) => 12,
            Error::OutOfOrder { .. } => 13,
            Error::Malformed { .. } => 14,
            Error::Parse(_) => 15,
            Error::Io(_) => 16,
            Error::Csv(_) => 17,
            Error::Json(_) => 18,
            // a failed sweep cell reports the underlying failure's code
            Error::Cell { source, .. } => source.code(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
