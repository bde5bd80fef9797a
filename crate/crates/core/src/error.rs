use std::io;

use thiserror::Error;

use crate::lang::Path;
use crate::types::Type;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed type `{0}`")]
    TypeSyntax(String),

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("unbound input variable `{name}` (program has {arity} inputs)")]
    UnboundInput { name: String, arity: usize },

    #[error("malformed program: {0}")]
    Malformed(String),

    #[error("invalid path {0:?}")]
    InvalidPath(Path),

    #[error("location has {paths} paths but {replacements} replacements were given")]
    ReplacementCount { paths: usize, replacements: usize },

    #[error("location paths {0:?} and {1:?} overlap")]
    OverlappingPaths(Path, Path),

    #[error("type mismatch at {path:?}: expected {expected}, found {found}")]
    TypeMismatch {
        path: Path,
        expected: Type,
        found: Type,
    },

    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),

    #[error("input x{} out of range", .0 + 1)]
    InputOutOfRange(usize),

    #[error("program contains a hole at {0:?}")]
    Incomplete(Path),

    #[error("invalid DSL: {0}")]
    Dsl(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("dimension mismatch at layer {layer}: {detail}")]
    DimensionMismatch { layer: usize, detail: String },

    #[error("invalid weight file: {0}")]
    Weights(String),

    #[error("gave up sampling after {0} attempts")]
    SamplingBudget(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
