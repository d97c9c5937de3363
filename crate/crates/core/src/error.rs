use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("symmetric eigendecomposition failed to converge")]
    EigenFailure,

    #[error("numerical failure in {module} at step {step}: {source}")]
    AtStep {
        step: u64,
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("out-of-order step: expected t = {expected}, got t = {got}")]
    OutOfOrder { expected: u64, got: u64 },

    #[error("no learner outputs to combine")]
    EmptyOutputs,

    #[error("weights and learner outputs cover different intervals")]
    WeightMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: u64, module: &'static str) -> Error {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                module,
                source: Box::new(e),
            },
        }
    }
}
