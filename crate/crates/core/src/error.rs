use thiserror::Error;

/// Error type shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dataset error in {file}:{line}: {msg}")]
    DatasetParse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("metric undefined: {0}")]
    DegenerateMetric(String),

    #[error("non-finite loss at epoch {epoch} (seed {seed})")]
    Divergence { epoch: usize, seed: u64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
