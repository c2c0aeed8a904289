//! Online regression for streaming runtime estimation.
//!
//! Parametric (windowed and forgetting MLE/MAP), Gaussian-process and
//! Nadaraya-Watson learners share one predict/update/tune lifecycle, and are
//! scored with prequential, bound and timing metrics.

pub mod baseline;
pub mod config;
pub mod datagen;
pub mod error;
pub mod evalkit;
pub mod gp;
pub mod kreg;
pub mod lifecycle;
pub mod numkit;
pub mod parametric;
pub mod stats;
pub mod types;
pub mod window;

pub use config::{Adaptation, ConfigError, Family, LearnerConfig};
pub use error::LearnerError;
pub use lifecycle::{LearnerState, Model, OnlineLearner};
pub use types::{DataPoint, ObservedPair, PredictionTriple};
