//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported document format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("segment {id:?}: {reason}")]
    BadSegment { id: String, reason: String },

    #[error("connection {from:?} -> {to:?}: {reason}")]
    BadConnection {
        from: String,
        to: String,
        reason: String,
    },

    #[error("node {node:?}: {reason}")]
    BadNode { node: String, reason: String },

    #[error("segment {id:?} is not reachable from any spawn segment")]
    Unreachable { id: String },

    #[error("unknown segment id {id:?}")]
    UnknownSegment { id: String },

    #[error("no route from {from:?} to {to:?}")]
    NoRoute { from: String, to: String },

    #[error("segment {id:?}: series too short to fit ({got} transitions, need {needed})")]
    SeriesTooShort {
        id: String,
        needed: usize,
        got: usize,
    },

    #[error("model was fitted for graph {model_hash}, current graph hashes to {graph_hash}")]
    GraphHashMismatch {
        model_hash: String,
        graph_hash: String,
    },

    #[error("relative error undefined: every reference value is zero")]
    AllReferencesZero,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("scenario config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("toml parse: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("toml write: {0}")]
    TomlWrite(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
