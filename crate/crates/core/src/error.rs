use std::path::PathBuf;

use thiserror::Error;

use crate::model::{ElementId, ValidationReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected:?}, found {found:?}")]
    DimensionMismatch { what: &'static str, expected: (u32, u32), found: (u32, u32) },

    #[error("layering does not match scene: {0}")]
    LayeringMismatch(String),

    #[error("unknown element {0}")]
    UnknownElement(ElementId),

    #[error("stack graph contains a cycle through {0:?}")]
    CycleDetected(Vec<ElementId>),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing file")]
    MissingFile { path: PathBuf },

    #[error("{path}: corrupt file: {detail}")]
    Corrupt { path: PathBuf, detail: String },

    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: invariant violated:\n{report}")]
    Invariant { path: PathBuf, report: ValidationReport },

    #[error("navigation failed: {0}")]
    Navigation(String),

    #[error("timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("devtools protocol error: {0}")]
    Protocol(String),

    #[error("page script failed: {0}")]
    Script(String),

    #[error("stale node handle {0}")]
    StaleHandle(String),

    #[error("capture group for {xpath} discarded: {reason}")]
    GroupDiscarded { xpath: String, reason: String },

    #[error("inline styles not restored for {0:?}")]
    StylesNotRestored(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        Error::Corrupt { path: path.into(), detail: detail.to_string() }
    }
}
