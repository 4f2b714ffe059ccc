use thiserror::Error;

use crate::model::ValidationReport;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model validation failed: {}", .0.summary())]
    ModelValidation(Box<ValidationReport>),

    #[error("simulation diverged at step {step}, particle {particle} (|x| = {magnitude:e})")]
    Diverged {
        step: usize,
        particle: usize,
        magnitude: f64,
    },

    #[error("rate evaluation failed: {0}")]
    RateEvaluation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(
        "coefficient array needs {required_bytes} bytes, above the configured cap of {cap_bytes} bytes \
         ({components} components x {time_modes} time modes x {space_modes} frequency points)"
    )]
    MemoryCap {
        required_bytes: usize,
        cap_bytes: usize,
        components: usize,
        time_modes: usize,
        space_modes: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected,
                actual,
            })
        }
    }
}
