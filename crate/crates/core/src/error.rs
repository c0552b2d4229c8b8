use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid scenario or map configuration; `field` is a dotted path.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    /// A metric does not apply to the supplied logs.
    #[error("metric `{metric}` inapplicable: {reason}")]
    Inapplicable { metric: &'static str, reason: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("log parse error at line {line}: {message}")]
    LogParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
