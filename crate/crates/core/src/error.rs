use std::fmt;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters or an inconsistent configuration.
    Config(String),
    /// Arithmetic across two distinct field specifications.
    FieldMismatch { expected: (u8, u8), got: (u8, u8) },
    /// On-the-wire or in-memory data contradicts itself (bad trace, bad payload).
    Corruption(String),
    /// Malformed serialized input; `offset` is the byte position where parsing failed.
    Parse { offset: usize, message: String },
    /// An optimization or feasibility query has no solution.
    Infeasible(String),
    /// An argument violates a documented precondition.
    InvalidArgument(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::FieldMismatch { expected, got } => write!(
                f,
                "field mismatch: expected GF({}^{}), got GF({}^{})",
                expected.0, expected.1, got.0, got.1
            ),
            Error::Corruption(msg) => write!(f, "corruption detected: {msg}"),
            Error::Parse { offset, message } => {
                write!(f, "parse error at byte {offset}: {message}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
