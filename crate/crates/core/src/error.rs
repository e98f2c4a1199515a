use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("label {label} in row {row} is out of range for {n_classes} classes")]
    Label {
        row: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("missing key: {0}")]
    Key(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("schema error in {}: {msg}", file.display())]
    Schema { file: PathBuf, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("class {class} has {available} rows, {requested} requested")]
    InsufficientRows {
        class: String,
        available: usize,
        requested: usize,
    },

    #[error("undefined ROC curve: {0}")]
    UndefinedCurve(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported container version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violated: {0}")]
    Internal(String),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Key(_) => ErrorKind::Usage,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => ErrorKind::Usage,
            Error::Label { .. }
            | Error::Schema { .. }
            | Error::Data(_)
            | Error::InsufficientRows { .. }
            | Error::UndefinedCurve(_)
            | Error::Format(_)
            | Error::Version { .. }
            | Error::Truncated(_)
            | Error::Io { .. }
            | Error::Shape(_)
            | Error::DegenerateBatch(_) => ErrorKind::Data,
            Error::Dimension { .. } | Error::Internal(_) => ErrorKind::Internal,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
