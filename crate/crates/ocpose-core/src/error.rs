use std::path::PathBuf;

/// Errors surfaced by loading, geometry, matching, and the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(
        "parse error in {path}: {message} (line {line}, column {column}, byte offset {offset})"
    )]
    Parse {
        path: PathBuf,
        message: String,
        line: usize,
        column: usize,
        offset: usize,
    },

    #[error("schema error in annotation {annotation_id}: {message}")]
    Schema { annotation_id: i64, message: String },

    #[error("unknown image reference(s): {0:?}")]
    Reference(Vec<i64>),

    #[error("mask decode error: {0}")]
    Decode(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("synthetic generation error: {0}")]
    Generation(String),

    #[error("brute-force oracle refuses instance of size {n_det}x{n_gt} (limit 6x6)")]
    OracleLimit { n_det: usize, n_gt: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code grouping used by the CLI: 1 usage, 2 data, 3 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
