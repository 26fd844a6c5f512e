use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("document `{0}` has no analyzable text")]
    NoAnalyzableText(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid BIO sequence `{sequence}`: {reason}")]
    InvalidBio { sequence: String, reason: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("empty query")]
    EmptyQuery,

    #[error("empty active collection")]
    EmptyCollection,

    #[error("background corpus empty")]
    EmptyBackground,

    #[error("unknown briefcase `{0}`")]
    UnknownBriefcase(String),

    #[error("briefcase `{id}` has no version {version}")]
    UnknownVersion { id: String, version: u64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse {
            what,
            detail: detail.into(),
        }
    }
}
