use thiserror::Error;

use crate::model::MsgId;

/// Errors produced while parsing input files or running the mining pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed input: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("line {line}: duplicate message id {id}")]
    DuplicateId { line: usize, id: MsgId },

    #[error("line {line}: duplicate message quadruple {quad}")]
    DuplicateQuadruple { line: usize, quad: String },

    #[error("line {line}, column {column}: unknown message id {id}")]
    UnknownId {
        line: usize,
        column: usize,
        id: MsgId,
    },

    #[error("{set} set references undeclared message id {id}")]
    UndeclaredDirective { set: &'static str, id: MsgId },

    #[error("message id {id} is declared both initial and terminal")]
    InitialTerminalOverlap { id: MsgId },

    #[error("message definition stream declares no messages")]
    EmptyDictionary,

    #[error("trace set is empty")]
    EmptyTraceSet,

    #[error("no initial message occurs in any trace; nothing to mine")]
    EmptyModel,

    #[error("pruning at theta={theta} disconnected every root from every terminal; try a lower theta")]
    OverPruned { theta: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
