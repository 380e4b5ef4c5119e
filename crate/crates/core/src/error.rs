use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("padding horizon {i_pad} too small for segment {segment} of duration {duration}")]
    PadTooSmall {
        segment: usize,
        duration: usize,
        i_pad: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("class {class} out of range for {classes} classes")]
    BadClass { class: usize, classes: usize },

    #[error("token {token} at position {position} out of range for vocabulary of {vocab}")]
    BadToken {
        token: usize,
        position: usize,
        vocab: usize,
    },

    #[error("invalid distribution: entries sum to {sum}")]
    BadDistribution { sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("bad checkpoint magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),

    #[error("checkpoint truncated: needed {needed} more bytes at offset {offset}")]
    TruncatedFile { offset: usize, needed: usize },

    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
