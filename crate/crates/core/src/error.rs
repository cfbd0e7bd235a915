//! Error type shared across the workspace.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes, widths, frame lengths or other static setup problems.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad runtime data: empty signals, zero-power references, misaligned lengths.
    #[error("input error: {0}")]
    Input(String),

    /// API misuse (e.g. backward on a non-scalar, backward called twice).
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed on-disk artifacts (WAV files, checkpoints, sweep specs).
    #[error("format error: {0}")]
    Format(String),

    /// NaN/Inf escaped into a place that must stay finite.
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Training loss went NaN; the last good checkpoint is preserved by the caller.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
