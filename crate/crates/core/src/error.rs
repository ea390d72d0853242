use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtrError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("network is islanded into {} components: {components:?}", components.len())]
    Islanded { components: Vec<Vec<usize>> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("model error: {0}")]
    Unbounded(String),

    #[error("singular: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl OtrError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        OtrError::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for the errors the CLI maps to the parse/validation exit code.
    pub fn is_input_error(&self) -> bool {
        matches!(self, OtrError::Parse { .. } | OtrError::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, OtrError>;
