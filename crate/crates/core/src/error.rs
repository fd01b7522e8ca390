use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular jet: |det g| = {det:e} is below the invertibility threshold")]
    SingularJet { det: f64 },

    #[error("operation `{operation}` is not defined for jet order {order}")]
    UnsupportedOrder { operation: &'static str, order: usize },

    #[error("particle index {index} out of range for {count} particles")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("non-finite state encountered at integration step {step}")]
    Divergence { step: usize },

    #[error("shooting diverged at step {step} while probing momentum entry {probe}")]
    ProbeDivergence { probe: usize, step: usize },

    #[error("trajectory has {0} snapshot(s); at least two are required")]
    ShortTrajectory(usize),

    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::ProbeDivergence { .. })
    }
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
