use thiserror::Error;

/// Errors raised by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("subset enumeration needs {needed} subsets, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("bound constants are invalid (A0 = {a0} <= 0)")]
    InvalidConstants { a0: f64 },

    #[error("the unsaturated block is empty")]
    EmptyUnsaturatedBlock,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
