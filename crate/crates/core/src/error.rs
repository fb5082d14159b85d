use thiserror::Error;

/// Errors raised by the geometry, sampling and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("input error: {0}")]
    Input(String),
    /// A configured size cap would be exceeded.
    #[error("resource error: {what} requires {required}, cap is {cap}")]
    Resource {
        what: String,
        required: f64,
        cap: f64,
    },
    /// A numerical routine failed to reach its tolerance.
    #[error("numeric error: {what} reached {achieved:e}, requested {requested:e}")]
    Numeric {
        what: String,
        achieved: f64,
        requested: f64,
    },
    /// The body's volume-normalized second-moment tensor is anisotropic.
    #[error("not in isotropic position: per-axis second moments {moments:?}")]
    NotIsotropic { moments: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
