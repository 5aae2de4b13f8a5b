use thiserror::Error;

/// Errors raised anywhere in the lab.
///
/// The CLI maps `Usage` and `Io` to exit code 2; the other variants mark a
/// computation that could not be carried out for the given input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("nonpositive density l_t = {value} at path {path}, step {step}")]
    NonPositiveDensity { path: usize, step: usize, value: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
