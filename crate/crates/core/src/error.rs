use std::path::PathBuf;

/// Errors produced anywhere in the medial pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("shrinking ball did not converge after {iterations} iterations (last radius {radius})")]
    NoConvergence { iterations: usize, radius: f64 },
    #[error("training diverged at step {step}")]
    Diverged {
        step: usize,
        /// Parameters before the step that produced a non-finite loss.
        last_good: Box<crate::neural::Mlp>,
    },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Numerical(_) | Error::NoConvergence { .. } | Error::Diverged { .. } => 3,
            Error::Empty(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::InvalidInput(_) | Error::Unsupported(_) | Error::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
