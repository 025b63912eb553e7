use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not fit the operation's shape map.
    #[error("shape error: {0}")]
    Shape(String),

    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input lies outside the operation's domain (empty mask, single-class labels, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The API was used in an unsupported way.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Manifest { path: PathBuf, line: usize, msg: String },

    #[error("invalid raster {path}: {msg}")]
    Raster { path: PathBuf, msg: String },

    #[error("checkpoint has bad magic bytes")]
    CheckpointMagic,

    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error("checkpoint is truncated: {0}")]
    CheckpointTruncated(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end:
    /// 1 usage/config, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Usage(_) | Error::Config(_) => 1,
            Error::Manifest { .. }
            | Error::Raster { .. }
            | Error::Domain(_)
            | Error::CheckpointMagic
            | Error::CheckpointVersion(_)
            | Error::CheckpointTruncated(_)
            | Error::ArchitectureMismatch(_) => 2,
            Error::Shape(_) | Error::Io { .. } => 3,
        }
    }
}
