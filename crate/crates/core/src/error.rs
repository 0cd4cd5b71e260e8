use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition. `field` names the
    /// offending quantity.
    Invalid { field: &'static str, reason: String },
    /// The safety QP had no feasible point and the configured policy is to
    /// fail hard.
    Infeasible { step: Option<usize> },
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::Infeasible { .. } => Error::Infeasible { step: Some(step) },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid { field, reason } => write!(f, "invalid {field}: {reason}"),
            Error::Infeasible { step: Some(k) } => {
                write!(f, "safety QP infeasible at step {k}")
            }
            Error::Infeasible { step: None } => f.write_str("safety QP infeasible"),
            Error::UnknownPreset(name) => write!(f, "unknown preset `{name}`"),
        }
    }
}

impl core::error::Error for Error {}

/// Rejects NaN and infinities.
pub(crate) fn ensure_finite(field: &'static str, values: &[f64]) -> Result<(), Error> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}
