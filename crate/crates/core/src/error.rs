use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while reading or writing BCNW tensor files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected \"BCNW\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported BCNW version {found} (this build reads version 1)")]
    UnsupportedVersion { found: u32 },
    #[error("truncated payload while reading tensor `{tensor}`")]
    Truncated { tensor: String },
    #[error("duplicate tensor name `{name}`")]
    DuplicateName { name: String },
    #[error("tensor `{name}` has dims {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor `{name}`")]
    MissingTensor { name: String },
    #[error("unexpected tensor `{name}` in a backbone weight set")]
    UnexpectedTensor { name: String },
    #[error("tensor `{name}` has invalid rank {rank} (expected 1..=4)")]
    InvalidRank { name: String, rank: u8 },
    #[error("tensor `{name}` has a zero dimension")]
    ZeroDim { name: String },
    #[error("tensor name is not valid UTF-8 (bytes {bytes:?})")]
    InvalidName { bytes: Vec<u8> },
    #[error("tensor name `{name}` is longer than 255 bytes")]
    NameTooLong { name: String },
    #[error("{} trailing bytes after the last tensor", .count)]
    TrailingBytes { count: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Dataset discovery and image decoding failures.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("dataset root {root} has {found} class directories, need at least 2")]
    TooFewClasses { root: PathBuf, found: usize },
    #[error("class `{class}` has no images")]
    EmptyClass { class: String },
    #[error("validation fraction {0} is outside [0, 1)")]
    InvalidFraction(f64),
    #[error("subset `{0}` is empty")]
    EmptySubset(&'static str),
    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("cannot write image {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("label row {row} is not one-hot")]
    NotOneHot { row: usize },
    #[error("stale cache: {0}")]
    StaleCache(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty {0} stream")]
    EmptyStream(&'static str),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
