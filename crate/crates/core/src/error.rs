use thiserror::Error;

use crate::model::ItemId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no realization with positive probability is consistent with the observation")]
    ZeroMassCondition,
    #[error("the prior is not enumerable")]
    NotEnumerable,
    #[error("the task set is empty")]
    EmptyTaskSet,
    #[error("adaptive rule re-selected item {0}")]
    BudgetExceeded(ItemId),
    #[error("initial set of size {l} cannot be drawn from {n} items")]
    InfeasibleBudget { l: usize, n: usize },
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training touched test task {0}")]
    TestLeak(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
