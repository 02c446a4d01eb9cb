use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid pattern {pattern:?}: {msg}")]
    Pattern { pattern: String, msg: String },

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("unknown keyword list {0:?}")]
    UnknownKeywordList(String),

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("empty label matrix")]
    EmptyMatrix,

    #[error("no signal: every labeling function abstains on every row")]
    NoSignal,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing gold label for sample {0}")]
    MissingGold(String),

    #[error("nothing to score")]
    NothingToScore,

    #[error("training set must contain both preference classes")]
    OneClass,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause: source,
        }
    }
}
