use std::path::PathBuf;

use thiserror::Error;

use crate::embedding::EmbeddingParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("symbol {symbol:?} has more than one active column in group {group:?}")]
    OneHotViolation { symbol: String, group: String },

    #[error("duplicate symbol {0:?}")]
    DuplicateSymbol(String),

    #[error("unknown symbol {cluster:?} at position {position}")]
    UnknownSymbol { position: usize, cluster: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cosine term undefined for a zero-norm vector")]
    ZeroVector,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, last_finite: Box<EmbeddingParams> },

    #[error("non-finite gradient (task {task:?}, inner step {inner_step:?})")]
    NonFiniteGradient { task: Option<usize>, inner_step: Option<usize> },

    #[error("attention map has {frames} frames but {phonemes} phonemes")]
    TooFewFrames { frames: usize, phonemes: usize },

    #[error("row {0} has no usable cell on any monotonic path")]
    DegenerateRow(usize),

    #[error("no monotonic path with non-zero probability")]
    NoMonotonicPath,

    #[error("instance of {frames}x{phonemes} is too large for exhaustive enumeration")]
    InstanceTooLarge { frames: usize, phonemes: usize },

    #[error("attention row {row} sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("invalid attention map: {0}")]
    InvalidAttention(String),

    #[error("held-out symbol {0:?} is not in the feature table")]
    HeldoutNotInTable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code for this error: 1 for environment and input-file
    /// problems, 2 for domain errors (validation, infeasibility).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FileNotFound(_)
            | Error::Io { .. }
            | Error::MalformedRow { .. }
            | Error::OneHotViolation { .. }
            | Error::DuplicateSymbol(_)
            | Error::Checkpoint(_) => 1,
            _ => 2,
        }
    }
}
