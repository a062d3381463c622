use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed tree in sentence {sentence_id}: {message}")]
    Structure { sentence_id: String, message: String },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown sentence: {0}")]
    Mapping(String),

    #[error("fixations out of order: {0}")]
    Ordering(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("sentence {sentence_id}: expected {expected} components, found {found}")]
    Dimension {
        sentence_id: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid value: {0}")]
    Value(String),

    #[error("duplicate sentence id: {0}")]
    Duplicate(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("sentence {0} has no dependency annotation")]
    MissingSyntax(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn structure(sentence_id: &str, message: impl Into<String>) -> Self {
        Error::Structure {
            sentence_id: sentence_id.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input or arguments, as opposed to
    /// failures of the environment (I/O).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
            && !matches!(self, Error::Csv(e) if e.is_io_error())
    }
}
