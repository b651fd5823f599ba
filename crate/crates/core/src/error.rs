use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised while building or evaluating a safety filter.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "rank violation: L_g1 L_f^(r-1) y is not full column rank (condition number {condition:.3e}) at state {state:?}"
    )]
    RankViolation { condition: f64, state: Vec<f64> },

    #[error("parameter condition violated: lambda >= gamma + epsilon*mu/(4*beta) requires lambda >= {required}, got lambda = {lambda}")]
    ParameterCondition { lambda: f64, required: f64 },

    #[error("quaternion is not unit length (norm {norm})")]
    NonUnitQuaternion { norm: f64 },

    #[error("non-finite state at t = {time}: {state:?}")]
    NonFiniteState { time: f64, state: Vec<f64> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
