use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A size-capped routine was asked for more than it is configured to do.
    #[error("{what} too large: requested {requested}, cap {cap} (estimated size {estimate})")]
    OverCap { what: &'static str, requested: usize, cap: usize, estimate: u64 },

    #[error("numerical failure in {routine}: {detail}")]
    Numerical { routine: &'static str, detail: String },

    /// A ball or translated point left the discretized box.
    #[error("outside the grid box: {clipped_fraction:.4} of the samples are clipped")]
    OutsideBox { clipped_fraction: f64 },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("degenerate metric space: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
