use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: row {row}, column `{column}`: {message}")]
    Row {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large for exhaustive search: {slots} slots, {tags} tags (limit {max_slots} x {max_tags})")]
    TooLarge {
        slots: usize,
        tags: usize,
        max_slots: usize,
        max_tags: usize,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// the environment. The CLI maps these to a distinct exit code.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Row { .. }
            | Error::Config(_)
            | Error::UnknownSlot(_)
            | Error::UnknownTag(_)
            | Error::Contract(_)
            | Error::TooLarge { .. }
            | Error::Json(_) => true,
            Error::Csv(e) => !matches!(e.kind(), csv::ErrorKind::Io(_)),
            Error::Io { .. } => false,
            Error::Stage { source, .. } => source.is_validation(),
        }
    }
}
