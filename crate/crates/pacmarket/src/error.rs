use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid budgets: {0}")]
    InvalidBudgets(String),

    #[error("invalid valuations: {0}")]
    InvalidValuations(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample {sample}, player {player}: expected a 0/1 value, found {found}")]
    NonBinarySampleValue {
        sample: usize,
        player: usize,
        found: f64,
    },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("exhaustive check over {k} goods exceeds the 2^{max} enumeration budget")]
    EnumerationTooLarge { k: usize, max: u32 },

    #[error("search budget exceeded: {0}")]
    LimitExceeded(String),

    #[error("optimal welfare is zero; efficiency ratio undefined")]
    ZeroOptimalWelfare,

    #[error("tied values: {0}")]
    TiedValues(String),

    #[error("fixed point not reached after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("ratings do not cover the requested market: {0}")]
    RatingsCoverage(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
