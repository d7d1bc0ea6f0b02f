use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A derivative order outside the stored range `[low, high]` was requested.
    #[error("order {requested} outside stored jet range [{low}, {high}]")]
    OrderExhausted { requested: i32, low: i32, high: i32 },

    #[error("jets expanded at different points ({0} vs {1})")]
    MismatchedPoint(f64, f64),

    /// Division by a jet whose constant term is (numerically) zero.
    #[error("singular reciprocal: |constant term| = {value:e} below threshold {threshold:e} (function lies in the kernel)")]
    Singular { value: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate basis fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("grid of {requested} points exceeds cap of {cap}")]
    GridTooLarge { requested: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
