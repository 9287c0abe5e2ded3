use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("unknown operation `{0}`")]
    UnknownOp(String),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    Vocabulary { id: usize, size: usize },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called on a non-scalar loss of shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward already ran on this tape")]
    StaleTape,

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid dependency heads: {0}")]
    DepHeads(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("tree syntax: {0}")]
    Tree(String),

    #[error("no grammar template matches `{0}`")]
    Unparseable(String),

    #[error("classifier must be frozen before it can guide generation")]
    NotFrozen,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownOp(_) => 2,
            Error::Parse { .. }
            | Error::Tree(_)
            | Error::DepHeads(_)
            | Error::Json(_)
            | Error::Io { .. }
            | Error::Checkpoint(_)
            | Error::Empty(_)
            | Error::Vocabulary { .. }
            | Error::Label { .. } => 3,
            Error::NonFinite(_) => 4,
            _ => 1,
        }
    }
}
