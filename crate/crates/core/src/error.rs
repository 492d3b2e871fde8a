use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A network, split or experiment configuration is inconsistent.
    #[error("configuration error{}: {message}", layer_suffix(.layer))]
    Config {
        layer: Option<usize>,
        message: String,
    },
    /// Input data violates a precondition (bad label, mismatched dims, ...).
    #[error("data error: {0}")]
    Data(String),
    /// A record-level data error; `index` is the offending record.
    #[error("data error at record {index}: {message}")]
    Record { index: usize, message: String },
    /// A referenced file is missing or unreadable.
    #[error("data error: cannot read {}: {message}", .path.display())]
    File { path: PathBuf, message: String },
    /// A text file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// A metric is undefined for the accumulated results.
    #[error("evaluation error: {0}")]
    Eval(String),
    /// Training data contains records tied to the fold's test side.
    #[error("leakage error in fold {fold}: {message}")]
    Leakage { fold: usize, message: String },
    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn layer_suffix(layer: &Option<usize>) -> String {
    match layer {
        Some(i) => format!(" at layer {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config {
            layer: None,
            message: message.into(),
        }
    }

    pub(crate) fn layer(layer: usize, message: impl Into<String>) -> Self {
        Error::Config {
            layer: Some(layer),
            message: message.into(),
        }
    }

    /// Attach a layer index to a configuration error that lacks one.
    pub(crate) fn at_layer(self, index: usize) -> Self {
        match self {
            Error::Config {
                layer: None,
                message,
            } => Error::Config {
                layer: Some(index),
                message,
            },
            other => other,
        }
    }

    /// True for errors caused by a broken internal invariant rather than user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
