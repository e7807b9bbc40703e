use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("null embedding cannot be compared or folded")]
    NullEmbedding,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("header declares dimension {header} but records carry dimension {records}")]
    HeaderDimensionMismatch { header: usize, records: usize },

    #[error("{0} unexpected trailing bytes after last record")]
    TrailingBytes(u64),

    #[error("frame timestamps are not monotone at index {index}")]
    NonMonotoneTimestamps { index: usize },

    #[error("malformed frame index at line {line}: {message}")]
    FrameIndex { line: usize, message: String },

    #[error("scene trajectory is empty")]
    EmptyTrajectory,

    #[error("empty terrain: no points labeled {0:?}")]
    EmptyTerrain(String),

    #[error("distance map needs at least one obstacle cell")]
    NoObstacles,

    #[error("no nodes to refine")]
    NoNodes,

    #[error("no place nodes available")]
    NoPlaceNodes,

    #[error("duplicate terrain label {0:?}")]
    DuplicateLabel(String),

    #[error("empty task projection: no point matched any query")]
    EmptyTaskProjection,

    #[error("unknown schema version {0:?}")]
    UnknownSchemaVersion(String),

    #[error("dangling reference in edge {index} ({kind}): {id} is not defined")]
    DanglingEdge {
        index: usize,
        kind: String,
        id: String,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 I/O, 2 input/format, 3 empty result.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() != io::ErrorKind::UnexpectedEof => 1,
            Error::EmptyTaskProjection => 3,
            _ => 2,
        }
    }
}
