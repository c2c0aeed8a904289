//! Trivial reference learner: predicts the running mean of observed targets.

use crate::error::LearnerError;
use crate::lifecycle::Model;
use crate::stats::z_value;
use crate::types::{DataPoint, ObservedPair, PredictionTriple};

#[derive(Debug, Clone)]
pub struct MeanModel {
    n: usize,
    mean: f64,
    m2: f64,
    z: f64,
}

impl MeanModel {
    pub fn new(confidence: f64) -> Self {
        Self { n: 0, mean: 0.0, m2: 0.0, z: z_value(confidence) }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl Model for MeanModel {
    fn predict(&self, _x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        let sd = (self.m2 / self.n.max(1) as f64).sqrt();
        Ok(PredictionTriple::symmetric(self.mean, self.z * sd))
    }

    fn update(&mut self, pair: &ObservedPair, _last: &PredictionTriple) -> Result<(), LearnerError> {
        self.n += 1;
        let delta = pair.target - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (pair.target - self.mean);
        Ok(())
    }

    fn len(&self) -> usize {
        self.n
    }

    fn capacity(&self) -> usize {
        usize::MAX
    }
}
