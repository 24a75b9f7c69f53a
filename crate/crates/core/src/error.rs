use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// What went wrong while parsing an FVB or model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    BadMagic,
    BadVersion(u32),
    Truncated,
    NonFinite,
    Checksum,
    Invalid,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector length {len} is not divisible into {parts} parts")]
    Indivisible { len: usize, parts: usize },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("sample {index} has a non-finite component")]
    NonFiniteSample { index: usize },

    #[error("som {som}: {source}")]
    Som {
        som: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("counter overflow in class {class}, column {column}")]
    Overflow { class: usize, column: usize },

    #[error("classifier has no classes")]
    EmptyClassifier,

    #[error("format error at byte {offset}: {kind:?}{}", record.map(|r| format!(" (record {r})")).unwrap_or_default())]
    Format {
        kind: FormatKind,
        offset: u64,
        record: Option<usize>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(kind: FormatKind, offset: u64) -> Self {
        Error::Format {
            kind,
            offset,
            record: None,
        }
    }

    /// Innermost error, unwrapping SOM and pair context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Som { source, .. } | Error::Pair { source, .. } => source.root(),
            other => other,
        }
    }
}
