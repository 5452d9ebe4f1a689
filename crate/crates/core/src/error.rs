use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The scene document did not match the schema.
    #[error("scene parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    /// A structurally valid document broke a domain invariant.
    #[error("scene validation failed ({invariant}): {message}")]
    Validation {
        invariant: &'static str,
        message: String,
    },

    /// Layout keys do not match the scene's widget ids.
    #[error("layout keys do not match scene widgets: missing {missing:?}, unexpected {extra:?}")]
    KeyMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    /// Precondition on an operation's inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown widget id `{0}`")]
    UnknownWidget(String),

    #[error("move rejected: {0}")]
    MoveRejected(String),

    #[error("operation not supported in {0} mode")]
    UnsupportedMode(&'static str),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("run cancelled")]
    Cancelled,

    #[error("transcript mismatch: {0}")]
    TranscriptMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
