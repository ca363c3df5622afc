use thiserror::Error;

use crate::triplets::TripletSign;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration sizes differ: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("configuration is empty")]
    Empty,

    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("point {index} lies outside the unit cube")]
    OutsideUnitCube { index: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configurations are not weakly isotonic (first violation at {0:?})")]
    NotIsotonic(TripletSign),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dyadic containment violated at {label}: value {value} outside [{low}, {high}]")]
    ContainmentViolated {
        label: String,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("no set found: {0}")]
    NoSetFound(String),

    #[error("all {0} solver restarts failed")]
    AllRestartsFailed(usize),

    #[error("certificate check failed: {0}")]
    Certificate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
