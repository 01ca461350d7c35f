use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bit depth must be in [1, 7], got {0}")]
    BitsOutOfRange(u8),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Failures of the external detector subprocess. Each carries the frame it
/// was invoked for.
#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("frame {frame_id}: could not launch detector `{command}`: {source}")]
    Spawn {
        frame_id: u64,
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("frame {frame_id}: detector exited with {status}: {stderr}")]
    Failed {
        frame_id: u64,
        status: String,
        stderr: String,
    },

    #[error("frame {frame_id}: detector produced malformed output: {reason}")]
    MalformedOutput { frame_id: u64, reason: String },

    #[error("frame {frame_id}: detector timed out after {seconds:.1}s")]
    Timeout { frame_id: u64, seconds: f64 },
}

impl DetectorError {
    pub fn frame_id(&self) -> u64 {
        match self {
            DetectorError::Spawn { frame_id, .. }
            | DetectorError::Failed { frame_id, .. }
            | DetectorError::MalformedOutput { frame_id, .. }
            | DetectorError::Timeout { frame_id, .. } => *frame_id,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
