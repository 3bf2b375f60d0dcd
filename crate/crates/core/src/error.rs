use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which operand of a binary vector operation was at fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    First,
    Second,
}

impl std::fmt::Display for Operand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Operand::First => f.write_str("first"),
            Operand::Second => f.write_str("second"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("zero-norm vector as {0} argument of cosine")]
    ZeroNorm(Operand),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid layer combination: {0}")]
    LayerCombo(String),

    #[error("layers disagree on usage order or dimension: {0}")]
    InconsistentLayers(String),

    #[error("unknown usage id `{0}`")]
    UnknownUsage(String),

    #[error("item `{0}` is not assigned to any cluster")]
    Unassigned(String),

    #[error("clusterings are over different item sets")]
    ItemMismatch,

    #[error("distributions are defined over different cluster sets")]
    KeyMismatch,

    #[error("graph has {nodes} nodes; exhaustive search supports at most {max}")]
    TooManyNodes { nodes: usize, max: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
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

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by the caller's parameters.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_))
    }
}
