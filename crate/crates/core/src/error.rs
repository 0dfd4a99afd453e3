use thiserror::Error;

/// Errors raised by pools, oracles, estimator builders and minimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("item {item} is outside a pool of {n} items")]
    ItemOutOfPool { item: usize, n: usize },

    #[error("({0}, {0}) is not an instance: pairs must be distinct")]
    SelfPair(usize),

    #[error("pool mismatch: {left} vs {right} items")]
    PoolMismatch { left: usize, right: usize },

    #[error("label budget of {budget} distinct queries exhausted ({labeled} labeled)")]
    BudgetExhausted { budget: u64, labeled: u64 },

    #[error("verification reads require an oracle without a label budget")]
    BudgetedVerification,

    #[error("{what} supports at most {max} (got {got}); use local search instead")]
    TooLarge {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("label table: {0}")]
    LabelTable(String),

    #[error("hypothesis is not a member of the class")]
    NotInClass,

    #[error("minimizer failed: {0}")]
    Minimizer(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
