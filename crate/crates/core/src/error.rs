use thiserror::Error;

use crate::hilbert::Point;

/// Errors raised by the operator library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("a point must have at least one coordinate")]
    EmptyPoint,

    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("linear map is zero")]
    ZeroMap,

    #[error("operator norm of the linear map is unknown; call estimate_norm first")]
    MissingNorm,

    #[error("composition uncertified: {0}")]
    Uncertified(String),

    #[error("relaxation function returned {value} at {at:?}; values must be finite and positive")]
    InvalidRelaxation { value: f64, at: Point },

    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },

    #[error("operator list is empty")]
    EmptyOperatorList,

    #[error("weights and operators differ in length ({weights} vs {ops})")]
    WeightCount { weights: usize, ops: usize },

    #[error("the checked property needs at least one fixed point")]
    MissingFixPoints,

    #[error("point is not in the required set (violation {violation:e})")]
    NotInSet { violation: f64 },

    #[error("no witness found for k <= {k_max}; limiting slack h(rho) = {h}")]
    NoWitness { k_max: u64, h: f64 },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

pub(crate) fn check_below_one(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and less than 1",
        })
    }
}
