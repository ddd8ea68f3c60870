use std::path::PathBuf;

use crate::optim::IterTrace;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum PlsmError {
    #[error("index out of range: {what} = {index} (bound {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate row {row}: latent position has zero norm")]
    DegenerateRow { row: usize },

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence {
        iteration: usize,
        trace: Box<IterTrace>,
    },

    #[error("rate undefined: {0}")]
    UndefinedRate(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl PlsmError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        PlsmError::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PlsmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PlsmError::Divergence { .. } | PlsmError::DegenerateRow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, PlsmError>;
