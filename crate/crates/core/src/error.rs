use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A configuration violates one of the scheme constraints.
    #[error("config error: {0}")]
    Config(String),

    /// A quadrature or geometric consistency check failed (under-resolution).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Density dropped below the admissible floor.
    #[error("vacuum error: {0}")]
    Vacuum(String),

    /// A stability bound was violated; reduce dt or increase micro-steps.
    #[error("stability error: {0}")]
    Stability(String),

    /// Dense linear solve failed.
    #[error("linear solve error: {0}")]
    LinearSolve(String),

    #[error("io error ({path}): {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Snapshot file is malformed or from an incompatible version.
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
