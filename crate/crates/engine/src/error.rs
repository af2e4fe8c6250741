use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{0}: no edges found")]
    EmptyInput(PathBuf),
    #[error("{0} already exists; pass --force to overwrite")]
    AlreadyExists(PathBuf),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset mismatch: {0}")]
    Mismatch(String),
    #[error("partition {partition}: {source}")]
    Partition {
        partition: u32,
        #[source]
        source: Box<EngineError>,
    },
    #[error("pipeline worker failed: {0}")]
    Worker(String),
    #[error("buffer: {0}")]
    Buffer(String),
    #[error(transparent)]
    Core(#[from] graphvec_core::Error),
}

impl EngineError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        EngineError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        EngineError::Format { path: path.into(), msg: msg.into() }
    }

    /// Process exit code: 1 for problems with user input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Parse { .. }
            | EngineError::EmptyInput(_)
            | EngineError::AlreadyExists(_)
            | EngineError::Config(_)
            | EngineError::Mismatch(_)
            | EngineError::Format { .. }
            | EngineError::Io { .. } => 1,
            EngineError::Partition { source, .. } => source.exit_code(),
            EngineError::Worker(_) | EngineError::Buffer(_) | EngineError::Core(_) => 2,
        }
    }
}
