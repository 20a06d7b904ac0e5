use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A tensor or map had the wrong extent along some axis.
    #[error("dimension error in {op}: axis {axis} expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    /// Invalid configuration (non-positive output size, channel chain, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// API misuse (backward on a non-scalar, empty sample set, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),
    /// A gradient or loss went NaN/Inf.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// The requested quantity is undefined for the given input.
    #[error("undefined result: {0}")]
    Undefined(String),
}

pub type Result<T> = core::result::Result<T, Error>;
