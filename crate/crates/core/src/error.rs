//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Syntax error while parsing a formula or rule. Positions are
    /// 1-based byte offsets into the input.
    #[error("syntax error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// An element was used with an algebra of a different atom count.
    #[error("element width mismatch: expected {expected} atoms, got {found}")]
    WidthMismatch { expected: u32, found: u32 },

    /// An exhaustive search would exceed the configured budget. This is
    /// reported distinctly from a negative answer: nothing was decided.
    #[error("search budget exceeded while {what}: needed {needed}, budget {budget}")]
    BudgetExceeded {
        what: String,
        needed: u64,
        budget: u64,
    },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed structured input (JSON frames/algebras, labels, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
