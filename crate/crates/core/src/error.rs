use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),
    #[error("trajectory {trajectory} diverged at step {step} (last finite step {last_finite_step})")]
    Divergence {
        trajectory: usize,
        step: usize,
        last_finite_step: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
}
