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

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("prompt assembly error: missing mandatory slot `{slot}` for {level} prompt")]
    Assembly { level: String, slot: String },

    #[error("prompt budget error: untruncatable content needs {needed} units, budget is {budget}")]
    Budget { needed: usize, budget: usize },

    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),

    #[error("code extraction error: {0}")]
    Extraction(String),

    #[error("external tool error: {0}")]
    Tool(String),

    #[error("name mapping error: {0}")]
    Mapping(String),

    #[error("stage ordering error: `{stage}` requires `{missing}` to run first")]
    Ordering { stage: String, missing: String },

    #[error("run halted after {units} translated units as requested")]
    Halted { units: usize },

    #[error("retrieval error: {0}")]
    Retrieval(String),

    #[error("malformed {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(what: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            what: what.into(),
            source,
        }
    }
}
