//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation received an input outside its domain (empty group,
    /// too-few samples, non-scalar backward root, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range (negative rate, k < 2, ...).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Operand shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A cosine similarity was requested for a zero-norm vector.
    #[error("zero-norm vector{}", match .index { Some(i) => format!(" at index {i}"), None => String::new() })]
    ZeroNorm { index: Option<usize> },

    /// A dataset record failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Two dataset records share an id.
    #[error("duplicate sample id: {0}")]
    DuplicateId(String),

    /// A loss function evaluated twice at the same point disagreed.
    #[error("non-deterministic loss function: {0}")]
    Nondeterminism(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error to: 1 for validation failures,
    /// 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidConfig(_)
            | Error::Shape(_)
            | Error::ZeroNorm { .. }
            | Error::Parse { .. }
            | Error::DuplicateId(_) => 1,
            Error::Nondeterminism(_) | Error::Io(_) => 2,
        }
    }
}
