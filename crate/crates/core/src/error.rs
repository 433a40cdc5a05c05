use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label vocabulary is empty after filtering with min_count = {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("label set is empty")]
    EmptyLabelSet,

    #[error("n_train = {n_train} is out of range for {len} records")]
    SplitOutOfRange { n_train: usize, len: usize },

    #[error("invalid product id `{0}`")]
    InvalidId(String),

    #[error("duplicate product id `{0}`")]
    DuplicateId(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for a table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("empty input sequence")]
    EmptySequence,

    #[error("sequence length {len} is shorter than the kernel size {kernel}")]
    SequenceTooShort { len: usize, kernel: usize },

    #[error(
        "non-finite loss at epoch {epoch}, batch {batch}; \
         the learning rate ({lr}) is probably too high, try lowering it by 10x"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        lr: f64,
    },

    #[error("no product id is shared by all modalities")]
    EmptyAlignment,

    #[error("linear system is singular or not positive definite (pivot {pivot} at row {row}); use alpha > 0")]
    Singular { row: usize, pivot: f64 },

    #[error("arity mismatch: expected {expected} modalities, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("labels hash mismatch: expected {expected:016x}, found {found:016x}")]
    HashMismatch { expected: u64, found: u64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{path}:{line}: {msg}")]
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
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}
