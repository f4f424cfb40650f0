use thiserror::Error;

use super::sexpr::Pos;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: {msg}: `{symbol}`")]
    Semantic { pos: Pos, msg: String, symbol: String },
    #[error("precondition violated: {literal}")]
    PreconditionViolated { literal: String },
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> Self {
        PddlError::Syntax { pos, msg: msg.into() }
    }

    pub(crate) fn semantic(pos: Pos, msg: impl Into<String>, symbol: impl Into<String>) -> Self {
        PddlError::Semantic { pos, msg: msg.into(), symbol: symbol.into() }
    }

    /// Source position, when the error came from parsing.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            PddlError::Syntax { pos, .. } | PddlError::Semantic { pos, .. } => Some(*pos),
            PddlError::PreconditionViolated { .. } => None,
        }
    }
}
