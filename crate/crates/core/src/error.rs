use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A query point or parameter lies outside the region where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The evaluation hit a kernel singularity (zero distance).
    #[error("kernel singularity: {0}")]
    Singularity(String),
    /// Running statistics hold fewer samples than the operation needs.
    #[error("insufficient data: need at least {needed} samples, have {have}")]
    InsufficientData { needed: u64, have: u64 },
    /// The requested configuration is not implemented (e.g. screened 2D kernels).
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Invalid configuration value, reported with the offending key.
    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
