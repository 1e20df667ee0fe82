use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{layer}: {reason}")]
    Layer { layer: &'static str, reason: String },

    #[error("EDF error at byte {offset}: {reason}")]
    Edf { offset: usize, reason: String },

    #[error("summary line {line}: {reason}")]
    Summary { line: usize, reason: String },

    #[error("channel selection failed: {0}")]
    Channels(String),

    #[error("annotation for {file}: {reason}")]
    Annotation { file: String, reason: String },

    #[error("not enough non-seizure segments: need {needed}, have {available}")]
    InsufficientSegments { needed: usize, available: usize },

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("training aborted at epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{kind} format error: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),

    #[error("no data: {0}")]
    NoData(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn layer(layer: &'static str, reason: impl Into<String>) -> Self {
        Error::Layer {
            layer,
            reason: reason.into(),
        }
    }

    pub fn config(reason: impl Into<String>) -> Self {
        Error::InvalidConfig(reason.into())
    }

    /// True for failures caused by the numbers themselves rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => true,
            Error::Training { source, .. } | Error::Repetition { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}
