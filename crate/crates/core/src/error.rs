use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or unreadable input (files, arguments, formats).
    Input,
    /// Input parsed but violates a structural invariant.
    Validation,
    /// Failure while computing (divergence, exhausted sampling budget).
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),

    #[error("too few hyperedges to split (have {0}, need at least 5)")]
    TooFewHyperedges(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch at layer {layer}: expected {expected} columns, got {got}")]
    LayerShape { layer: usize, expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("backward called without a matching forward pass")]
    MissingForward,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{strategy} sampling failed after {attempts} consecutive rejections")]
    SamplingExhausted { strategy: String, attempts: usize },

    #[error("candidate {index} references node {node} outside the sub-hypergraph")]
    NodeOutsideBatch { index: usize, node: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no positive predictions at threshold {0}")]
    NoPositivePredictions(f64),

    #[error("only one class present in labels")]
    SingleClass,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at step {step}: {msg}")]
    Diverged { step: usize, msg: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::InvalidArgument(_) | Error::Checkpoint(_) => {
                ErrorKind::Input
            }
            Error::InvalidHypergraph(_)
            | Error::TooFewHyperedges(_)
            | Error::LayerShape { .. }
            | Error::Shape(_)
            | Error::NodeOutsideBatch { .. }
            | Error::Empty(_)
            | Error::SingleClass => ErrorKind::Validation,
            Error::MissingForward
            | Error::NonFinite(_)
            | Error::SamplingExhausted { .. }
            | Error::NoPositivePredictions(_)
            | Error::Diverged { .. } => ErrorKind::Runtime,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
