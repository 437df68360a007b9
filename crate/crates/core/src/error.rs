use thiserror::Error;

/// Errors produced by the reconstruction pipeline.
#[derive(Error, Debug)]
pub enum MvsError {
    /// An input lies outside the domain of a mathematical operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller passed arguments that violate an operation's preconditions.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A binary or text file did not match its expected layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// A configuration (weights, manifest, pipeline settings) is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates an invariant (e.g. non-positive ground-truth depth).
    #[error("data error: {0}")]
    Data(String),

    /// The pipeline could not produce a result.
    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MvsError {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        MvsError::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        MvsError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, MvsError>;
