use thiserror::Error;

/// Errors raised while building, evaluating, or learning on a history process.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PohpError {
    /// A history is ill-formed or cannot be reached.
    #[error("structural error: {0}")]
    Structure(String),
    /// Input data (strategies, games, matrices) failed validation.
    #[error("validation error: {0}")]
    Validation(String),
    /// A node, enumeration, or episode budget was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// An operation was called on an agent lacking a required property.
    #[error("contract violated: {0}")]
    Contract(String),
    /// A quantity is undefined, e.g. conditioning on a zero-probability event.
    #[error("domain error: {0}")]
    Domain(String),
    /// Episode sampling did not terminate.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// A game description failed to parse.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = PohpError> = std::result::Result<T, E>;
