use thiserror::Error;

use crate::Vector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("unsupported function: {0}")]
    UnsupportedFunction(String),

    /// A solver ran out of its iteration or node budget. The best point found
    /// so far is attached when one exists.
    #[error("resource limit exceeded: {message}")]
    Resource {
        message: String,
        incumbent: Option<Vector>,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }
}
