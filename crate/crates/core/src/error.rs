use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A least-squares system without full column rank (for example more
    /// channel taps than pilot subcarriers).
    #[error("singular system: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The backscatter CFR estimate vanished, so the secondary symbol cannot
    /// be projected out of the composite channel.
    #[error("backscatter channel estimate is zero; secondary symbol undetectable")]
    ZeroBackscatter,

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
