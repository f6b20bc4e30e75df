use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the aggregation, training and experiment machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("nothing to aggregate")]
    EmptyAggregate,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("need at least {needed} clients, got {got}")]
    InsufficientClients { needed: usize, got: usize },

    #[error("every client has been excluded from the pool")]
    PoolExhausted,

    #[error("non-finite loss at local epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("global model became non-finite in round {round}")]
    GlobalDivergence { round: usize },

    #[error("cannot partition {samples} samples across {clients} clients")]
    InfeasiblePartition { samples: usize, clients: usize },

    #[error("malformed input at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
