use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion norm {norm:e} is too small to normalize")]
    ZeroQuaternion { norm: f64 },

    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("window spec ({n_windows} windows of {window_len}, stride {stride}) does not tile {frames} frames")]
    SpecMismatch {
        window_len: usize,
        n_windows: usize,
        stride: usize,
        frames: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("backward called before forward")]
    MissingCache,

    #[error("batch norm needs at least 2 rows in train mode, got {rows}")]
    DegenerateBatch { rows: usize },

    #[error("invalid network config: {0}")]
    BadConfig(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("corrupt feature file: {0}")]
    CorruptFeatures(String),

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    RaggedMatrix {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse {token:?} as a number")]
    BadNumber {
        path: PathBuf,
        row: usize,
        col: usize,
        token: String,
    },

    #[error("{path}: row {row}: unknown label {label}")]
    UnknownLabel {
        path: PathBuf,
        row: usize,
        label: String,
    },

    #[error("channel files disagree: {0}")]
    ChannelCountMismatch(String),

    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),

    #[error("class {class} has {count} samples, need at least 2")]
    ClassTooSmall { class: usize, count: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::ZeroQuaternion { .. } => "ZeroQuaternion",
            Error::AtFrame { source, .. } => source.class(),
            Error::SpecMismatch { .. } => "SpecMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::MissingCache => "MissingCache",
            Error::DegenerateBatch { .. } => "DegenerateBatch",
            Error::BadConfig(_) => "BadConfig",
            Error::CorruptCheckpoint(_) => "CorruptCheckpoint",
            Error::CorruptFeatures(_) => "CorruptFeatures",
            Error::RaggedMatrix { .. } => "RaggedMatrix",
            Error::BadNumber { .. } => "BadNumber",
            Error::UnknownLabel { .. } => "UnknownLabel",
            Error::ChannelCountMismatch(_) => "ChannelCountMismatch",
            Error::BadSpec(_) => "BadSpec",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::EmptyDataset(_) => "EmptyDataset",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
