use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("variable belongs to a graph that was already differentiated or cleared")]
    StaleGraph,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss([usize; 4]),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("{path}: bad checkpoint: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] firescope_core::Error),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        NnError::Shape {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
