use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cardinality k={k} is invalid for a universe of {n} items (need 1 <= k <= n)")]
    Cardinality { k: usize, n: usize },

    #[error("infeasible marginals: {reason}")]
    InfeasibleMarginals { reason: String },

    #[error("numerical degradation: {0}")]
    NumericalDegradation(String),

    #[error("reward {value} at index {index} is outside [0, 1]")]
    RewardOutOfRange { index: usize, value: f64 },

    #[error("invalid pair ({i}, {j}) for n={n}")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("instance too large: {what} = {size} exceeds the limit {limit}")]
    InstanceTooLarge {
        what: &'static str,
        size: f64,
        limit: f64,
    },

    #[error("feasibility violation at round {round}: {reason}")]
    FeasibilityViolation { round: usize, reason: String },

    #[error("unknown reward variant `{0}`")]
    UnknownVariant(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: item id {id} is out of range for n={n}")]
    Range { line: u64, id: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_cardinality(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Cardinality { k, n });
    }
    Ok(())
}
