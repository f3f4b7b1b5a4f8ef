use thiserror::Error;

/// A parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Semantic(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("unsupported formula: {0}")]
    Unsupported(String),
    #[error("malformed counterexample: {0}")]
    Malformed(String),
    #[error("refinement aborted: {0}")]
    Aborted(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn semantic(msg: impl Into<String>) -> Error {
    Error::Semantic(msg.into())
}
