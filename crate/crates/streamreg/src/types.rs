//! Stream items and prediction outputs shared by every learner.

use serde::{Deserialize, Serialize};

/// Bound magnitude emitted when a learner cannot yet say anything useful.
pub const SENTINEL_BOUND: f64 = 1e18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
}

impl DataPoint {
    pub fn new(features: Vec<f64>) -> Self {
        Self { features }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.features
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for DataPoint {
    fn from(features: Vec<f64>) -> Self {
        Self { features }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPair {
    pub point: DataPoint,
    pub target: f64,
}

impl ObservedPair {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Self { point: DataPoint::new(features), target }
    }

    pub fn x(&self) -> &[f64] {
        self.point.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionTriple {
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
}

impl PredictionTriple {
    /// Builds a triple, widening the bounds where needed so that lower ≤ point ≤ upper.
    pub fn new(lower: f64, point: f64, upper: f64) -> Self {
        Self { lower: lower.min(point), point, upper: upper.max(point) }
    }

    pub fn symmetric(point: f64, half_width: f64) -> Self {
        let h = half_width.abs();
        Self::new(point - h, point, point + h)
    }

    pub fn exact(point: f64) -> Self {
        Self { lower: point, point, upper: point }
    }

    /// Output used before a learner holds enough data.
    pub fn uninformed(point: f64) -> Self {
        Self { lower: -SENTINEL_BOUND, point, upper: SENTINEL_BOUND }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}
