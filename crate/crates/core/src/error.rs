use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch for `{tensor}`: expected {expected:?}, got {actual:?}")]
    Shape {
        tensor: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(tensor: impl Into<String>, expected: &[usize], actual: &[usize]) -> Self {
        Error::Shape {
            tensor: tensor.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failure kinds when reading a checkpoint file.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}
