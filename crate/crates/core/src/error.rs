use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or sizes that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("degenerate batch: sample weights sum to zero")]
    DegenerateBatch,

    #[error("degenerate signal: Var(alpha^T X) is zero")]
    DegenerateSignal,

    /// Cholesky failure after the jitter ladder, non-finite losses, etc.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    /// Malformed configuration text or flag values.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}
