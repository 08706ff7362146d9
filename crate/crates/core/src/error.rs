use thiserror::Error;

/// Errors raised by the discretization and the time steppers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A construction parameter is outside its valid range.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A derivative of higher order than the spline space supports was requested.
    #[error("derivative of order {order} is not supported for splines of degree {degree}")]
    UnsupportedOrder { order: usize, degree: usize },

    /// A fixed-point iteration hit its iteration cap.
    #[error("{stage} did not converge within {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A linear solve failed on a matrix that should have been SPD.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
