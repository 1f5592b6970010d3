use thiserror::Error;

/// Errors surfaced by the library.
///
/// Recoverable per-run conditions (estimator divergence, iteration caps)
/// are reported through status flags on results instead, so a sweep never
/// aborts because one trial went bad.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SVD did not converge")]
    SvdNonConvergence,

    #[error("tap file: {0}")]
    TapFile(String),

    #[error("config: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
