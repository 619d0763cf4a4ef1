use std::path::PathBuf;

use thiserror::Error;

use crate::features::SpaceTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: &'static str },

    #[error("invalid graph: {0}")]
    InvalidGraph(#[from] crate::graph::Violation),

    #[error("node {node} is not present (graph has {len} nodes)")]
    NodeOutOfRange { node: usize, len: usize },

    #[error("node {0} is not part of the visit")]
    NodeNotInVisit(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot combine feature spaces {left} and {right}")]
    SpaceMismatch { left: SpaceTag, right: SpaceTag },

    #[error("implicit feature spaces were built with different interners or heights")]
    InternerMismatch,

    #[error("zero diagonal entry at index {0}; cannot normalize")]
    ZeroDiagonal(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tree-visit node budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },

    #[error("training set needs both classes, found only {0:+}")]
    SingleClass(i8),

    #[error("solver did not converge after {iterations} iterations (violation {violation:e})")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error("cannot stratify: class {class:+} has {count} members for {folds} folds")]
    FoldTooSmall { class: i8, count: usize, folds: usize },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
