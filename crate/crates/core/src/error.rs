use thiserror::Error;

/// Errors produced by every layer of the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} needs {requested} qubits but the cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("standard error is undefined for a tail of {0} sample(s); at least 2 are required")]
    UndefinedEstimate(usize),

    #[error("unsupported ansatz: {0}")]
    UnsupportedAnsatz(String),

    #[error("objective returned {value} at evaluation {evaluation} (params {params:?})")]
    NonFiniteObjective {
        value: f64,
        evaluation: usize,
        params: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
