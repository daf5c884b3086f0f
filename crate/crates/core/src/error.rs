use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("waiting time k = {0} is not allowed (k must be >= 1)")]
    InvalidK(u32),

    #[error("value iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("prior is empty")]
    EmptyPrior,

    #[error("degenerate prior: every model assigns zero likelihood to the observation")]
    DegeneratePrior,

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("traces have mismatched horizons ({0} vs {1})")]
    HorizonMismatch(usize, usize),

    #[error("no traces to aggregate")]
    NoTraces,
}

pub type Result<T> = std::result::Result<T, Error>;
