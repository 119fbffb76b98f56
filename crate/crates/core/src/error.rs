use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contraction rank {r} out of range for orders {p} and {q}")]
    ContractionRank { r: usize, p: usize, q: usize },

    #[error("basis truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: u32, right: u32 },

    #[error("kernel order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("path grid mismatch (horizon, dimension or resolution differ)")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("transport solver failed: {0}")]
    Solver(String),

    #[error("certificate self-check failed: recorded total {recorded} vs recomputed {recomputed}")]
    CertificateMismatch { recorded: f64, recomputed: f64 },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
