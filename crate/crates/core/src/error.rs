use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its domain (point outside extent, empty geometry, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Bad or inconsistent configuration, manifest or template bank.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that does not satisfy its declared schema.
    #[error("validation error: {0}")]
    Validation(String),

    /// A SAR product whose structure cannot be processed.
    #[error("degenerate product: {0}")]
    Degenerate(String),

    #[error("elevation lookup failed: {0}")]
    Elevation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Degenerate(_) => "degenerate-product",
            Error::Elevation(_) => "elevation",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    /// True for errors caused by inputs failing validation rather than by a failure at run time.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Validation(_) | Error::InvalidGeometry(_) | Error::Json { .. }
        )
    }
}
