use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("episode already finished; reset before stepping")]
    EpisodeFinished,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("missing required config key `{0}`")]
    MissingKey(String),

    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("mismatched step grids: {0}")]
    StepGrid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
