use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible topology configuration: {0}")]
    InfeasibleConfig(String),

    #[error("topology generator gave up after {0} attempts")]
    RejectionLimitExceeded(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("instance too large for enumeration: {size} candidates exceed cap {cap}")]
    InstanceTooLarge { size: f64, cap: f64 },

    #[error("model is infeasible")]
    Infeasible,

    #[error("solver budget exhausted: {0}")]
    SolverBudgetExhausted(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown flow {0}")]
    UnknownFlow(usize),

    #[error("unknown edge cloud {0}")]
    UnknownEdgeCloud(usize),

    #[error("missing CNN bank: {0}")]
    MissingBank(String),

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
