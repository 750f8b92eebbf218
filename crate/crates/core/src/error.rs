use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("could not parse mesh {path}: {message}")]
    MeshParse { path: PathBuf, message: String },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("non-finite vertex coordinate at index {0}")]
    NonFiniteVertex(usize),

    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Metrics(String),

    #[error("schema mismatch in {path}: expected `{expected}`, found `{found}`")]
    Schema {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("incompatible runs: {0}")]
    Incompatible(String),

    #[error("malformed record in {path} line {line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
