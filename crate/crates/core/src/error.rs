use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An invalid parameter or configuration value. `field` names the offending
    /// entry, using dotted paths for nested configuration.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("photon number cutoff {cutoff} exceeded by occupation {occupation:?}")]
    Truncation { cutoff: u32, occupation: Vec<u8> },

    #[error("invalid use: {0}")]
    Usage(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("analysis failed: {0}")]
    Analysis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
