use thiserror::Error;

use crate::model::{Nonce, Uid};

/// Errors raised by the model, the role machines and the drivers.
///
/// Abnormal protocol termination is not an error: role machines report it
/// through their `Aborted` status.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("nonce {0} is not fresh: it already occurs in the history")]
    FreshnessViolation(Nonce),

    #[error("selector has length {selector} but the sequence has length {sequence}")]
    LengthMismatch { selector: usize, sequence: usize },

    #[error("message content must contain at least one item")]
    EmptyContent,

    #[error("public key {0} is not registered to any user")]
    UnknownKey(String),

    #[error("unknown user {0}")]
    UnknownUser(Uid),

    #[error("deadlock: every machine is blocked and no message is deliverable")]
    Deadlock,

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error("search bounds exhausted after {states} states")]
    BoundsExhausted { states: usize },

    #[error("actor {actor} cannot take step {step}: {reason}")]
    NotEnabled { step: usize, actor: String, reason: String },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
