use thiserror::Error;

use crate::lifecycle::{LearnerState, LifecycleEvent};
use crate::numkit::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("feature {index} = {value} must be positive for log/sqrt mapping")]
    NonPositiveFeature { index: usize, value: f64 },
    #[error("need more than {needed} points, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("illegal transition: {event:?} in state {state:?}")]
    IllegalTransition { state: LearnerState, event: LifecycleEvent },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
