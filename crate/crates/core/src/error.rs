use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data format error in {source_name}: {message}")]
    DataFormat {
        source_name: String,
        message: String,
    },

    #[error("unknown class name(s): {}", .0.join(", "))]
    UnknownClasses(Vec<String>),

    #[error("feature binding error: utterance id {id} is out of range for {count} rows")]
    Binding { id: usize, count: usize },

    #[error("embedding file error at byte {offset}: {message}")]
    EmbeddingFormat { offset: u64, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::DataFormat {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::DataFormat { .. }
            | Error::UnknownClasses(_)
            | Error::Binding { .. }
            | Error::EmbeddingFormat { .. }
            | Error::Index(_)
            | Error::Io { .. } => 3,
            Error::Checkpoint(_) => 4,
            Error::Numeric(_) | Error::Shape(_) => 5,
        }
    }
}
