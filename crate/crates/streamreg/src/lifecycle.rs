//! Learner lifecycle: phase machine, drift trigger and the drivers that decide
//! when a model is updated or tuned.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::LearnerError;
use crate::types::{DataPoint, ObservedPair, PredictionTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerState {
    ColdStart,
    Stable,
    HighError,
    Tune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifecycleEvent {
    WindowFull,
    TuneDone,
    DriftDetected,
    WindowRecycled,
}

pub fn advance_state(state: LearnerState, event: LifecycleEvent) -> Result<LearnerState, LearnerError> {
    use LearnerState::*;
    use LifecycleEvent::*;
    match (state, event) {
        (ColdStart, WindowFull) => Ok(Tune),
        (Tune, TuneDone) => Ok(Stable),
        (Stable, DriftDetected) => Ok(HighError),
        (HighError, WindowRecycled) => Ok(Tune),
        _ => Err(LearnerError::IllegalTransition { state, event }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Multiple of the baseline RMSE an error must exceed to count toward a streak.
    pub k: f64,
    /// Consecutive exceedances needed to fire.
    pub m: usize,
    /// Baseline samples required before the detector arms.
    pub min_samples: usize,
    /// Absolute threshold floor, so a perfect fit does not fire on round-off.
    pub floor: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { k: 3.0, m: 5, min_samples: 10, floor: 1e-9 }
    }
}

/// Streak detector against the running RMSE of the current stable period.
#[derive(Debug, Clone)]
pub struct DriftDetector {
    cfg: DriftConfig,
    sum_sq: f64,
    count: usize,
    streak: usize,
}

impl DriftDetector {
    pub fn new(cfg: DriftConfig) -> Self {
        Self { cfg, sum_sq: 0.0, count: 0, streak: 0 }
    }

    pub fn with_baseline(cfg: DriftConfig, rmse: f64, samples: usize) -> Self {
        Self { cfg, sum_sq: rmse * rmse * samples as f64, count: samples, streak: 0 }
    }

    pub fn reset(&mut self) {
        self.sum_sq = 0.0;
        self.count = 0;
        self.streak = 0;
    }

    pub fn baseline_rmse(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq / self.count as f64).sqrt())
    }

    pub fn is_armed(&self) -> bool {
        self.count >= self.cfg.min_samples
    }

    /// Feeds one absolute prediction error; returns true when drift fires.
    /// Errors that exceed the threshold are kept out of the baseline.
    pub fn observe(&mut self, abs_error: f64) -> bool {
        if self.is_armed() {
            let rmse = (self.sum_sq / self.count as f64).sqrt();
            let threshold = (self.cfg.k * rmse).max(self.cfg.floor);
            if abs_error > threshold || abs_error.is_nan() {
                self.streak += 1;
                if self.streak >= self.cfg.m {
                    self.streak = 0;
                    return true;
                }
                return false;
            }
            self.streak = 0;
        }
        self.sum_sq += abs_error * abs_error;
        self.count += 1;
        false
    }
}

/// The model half of a learner: state plus the predict/update/tune operations.
pub trait Model: Send {
    fn predict(&self, x: &DataPoint) -> Result<PredictionTriple, LearnerError>;
    fn update(&mut self, pair: &ObservedPair, last: &PredictionTriple) -> Result<(), LearnerError>;
    fn tune(&mut self) -> Result<(), LearnerError> {
        Ok(())
    }
    /// Number of points the model currently rests on.
    fn len(&self) -> usize;
    /// Window capacity; forgetting models report `usize::MAX`.
    fn capacity(&self) -> usize;
    fn is_full(&self) -> bool {
        self.len() >= self.capacity()
    }
}

/// What a learner did with one observed target.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Activity {
    pub update: Option<Duration>,
    pub tune: Option<Duration>,
}

/// Object-safe learner surface used by the session runner.
pub trait OnlineLearner: Send {
    fn phase(&self) -> LearnerState;
    fn predict(&mut self, x: &DataPoint) -> Result<PredictionTriple, LearnerError>;
    fn observe(&mut self, pair: &ObservedPair, predicted: &PredictionTriple) -> Result<Activity, LearnerError>;
}

fn timed<T>(f: impl FnOnce() -> Result<T, LearnerError>) -> Result<(T, Duration), LearnerError> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

fn guarded_predict<M: Model>(model: &M, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
    if model.len() < 2 {
        Ok(PredictionTriple::uninformed(0.0))
    } else {
        model.predict(x)
    }
}

/// Sliding-window lifecycle: cold start, tune, stable, high error.
pub struct WindowedLearner<M> {
    model: M,
    state: LearnerState,
    detector: DriftDetector,
    updates_in_high_error: usize,
}

impl<M: Model> WindowedLearner<M> {
    pub fn new(model: M, drift: DriftConfig) -> Self {
        Self {
            model,
            state: LearnerState::ColdStart,
            detector: DriftDetector::new(drift),
            updates_in_high_error: 0,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    fn run_tune(&mut self, activity: &mut Activity) -> Result<(), LearnerError> {
        let ((), t) = timed(|| self.model.tune())?;
        activity.tune = Some(t);
        self.state = advance_state(self.state, LifecycleEvent::TuneDone)?;
        self.detector.reset();
        Ok(())
    }

    fn run_update(&mut self, pair: &ObservedPair, last: &PredictionTriple, activity: &mut Activity) -> Result<(), LearnerError> {
        let ((), t) = timed(|| self.model.update(pair, last))?;
        activity.update = Some(t);
        Ok(())
    }
}

impl<M: Model> OnlineLearner for WindowedLearner<M> {
    fn phase(&self) -> LearnerState {
        self.state
    }

    fn predict(&mut self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        guarded_predict(&self.model, x)
    }

    fn observe(&mut self, pair: &ObservedPair, predicted: &PredictionTriple) -> Result<Activity, LearnerError> {
        let mut activity = Activity::default();
        match self.state {
            LearnerState::ColdStart => {
                self.run_update(pair, predicted, &mut activity)?;
                if self.model.is_full() {
                    self.state = advance_state(self.state, LifecycleEvent::WindowFull)?;
                    self.run_tune(&mut activity)?;
                }
            }
            LearnerState::Stable => {
                let err = (pair.target - predicted.point).abs();
                if self.detector.observe(err) {
                    self.state = advance_state(self.state, LifecycleEvent::DriftDetected)?;
                    self.updates_in_high_error = 0;
                    self.high_error_step(pair, predicted, &mut activity)?;
                }
            }
            LearnerState::HighError => self.high_error_step(pair, predicted, &mut activity)?,
            LearnerState::Tune => unreachable!("tune completes within a single observe"),
        }
        Ok(activity)
    }
}

impl<M: Model> WindowedLearner<M> {
    fn high_error_step(&mut self, pair: &ObservedPair, predicted: &PredictionTriple, activity: &mut Activity) -> Result<(), LearnerError> {
        self.run_update(pair, predicted, activity)?;
        self.updates_in_high_error += 1;
        if self.updates_in_high_error >= self.model.capacity() {
            self.state = advance_state(self.state, LifecycleEvent::WindowRecycled)?;
            self.run_tune(activity)?;
        }
        Ok(())
    }
}

/// Two-state predict/update loop of the forgetting learners.
pub struct ForgettingLearner<M> {
    model: M,
}

impl<M: Model> ForgettingLearner<M> {
    pub fn new(model: M) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: Model> OnlineLearner for ForgettingLearner<M> {
    fn phase(&self) -> LearnerState {
        LearnerState::Stable
    }

    fn predict(&mut self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        guarded_predict(&self.model, x)
    }

    fn observe(&mut self, pair: &ObservedPair, predicted: &PredictionTriple) -> Result<Activity, LearnerError> {
        let ((), t) = timed(|| self.model.update(pair, predicted))?;
        Ok(Activity { update: Some(t), tune: None })
    }
}

/// Batch control: fills its window once, tunes, then never changes again.
pub struct FrozenLearner<M> {
    model: M,
    state: LearnerState,
}

impl<M: Model> FrozenLearner<M> {
    pub fn new(model: M) -> Self {
        Self { model, state: LearnerState::ColdStart }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: Model> OnlineLearner for FrozenLearner<M> {
    fn phase(&self) -> LearnerState {
        self.state
    }

    fn predict(&mut self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        guarded_predict(&self.model, x)
    }

    fn observe(&mut self, pair: &ObservedPair, predicted: &PredictionTriple) -> Result<Activity, LearnerError> {
        let mut activity = Activity::default();
        if self.state == LearnerState::ColdStart {
            let ((), t) = timed(|| self.model.update(pair, predicted))?;
            activity.update = Some(t);
            if self.model.is_full() {
                self.state = advance_state(self.state, LifecycleEvent::WindowFull)?;
                let ((), t) = timed(|| self.model.tune())?;
                activity.tune = Some(t);
                self.state = advance_state(self.state, LifecycleEvent::TuneDone)?;
            }
        }
        Ok(activity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use LearnerState::*;
    use LifecycleEvent::*;

    #[test]
    fn legal_edges() {
        assert_eq!(advance_state(ColdStart, WindowFull).unwrap(), Tune);
        assert_eq!(advance_state(Tune, TuneDone).unwrap(), Stable);
        assert_eq!(advance_state(Stable, DriftDetected).unwrap(), HighError);
        assert_eq!(advance_state(HighError, WindowRecycled).unwrap(), Tune);
    }

    #[test]
    fn illegal_edges() {
        for s in [ColdStart, Stable, HighError, Tune] {
            for e in [WindowFull, TuneDone, DriftDetected, WindowRecycled] {
                let legal = matches!(
                    (s, e),
                    (ColdStart, WindowFull) | (Tune, TuneDone) | (Stable, DriftDetected) | (HighError, WindowRecycled)
                );
                assert_eq!(advance_state(s, e).is_ok(), legal, "{s:?} {e:?}");
            }
        }
        assert!(matches!(advance_state(Stable, WindowFull), Err(LearnerError::IllegalTransition { .. })));
    }

    #[test]
    fn detector_fires_on_streak() {
        let mut d = DriftDetector::with_baseline(DriftConfig::default(), 1.0, 100);
        let fired: Vec<bool> = (0..5).map(|_| d.observe(10.0)).collect();
        assert_eq!(fired, vec![false, false, false, false, true]);
        assert!(!d.observe(10.0), "streak restarts after firing");
    }

    #[test]
    fn detector_ignores_alternating_errors() {
        let mut d = DriftDetector::with_baseline(DriftConfig::default(), 1.0, 100);
        assert!((0..100).all(|i| !d.observe(if i % 2 == 0 { 10.0 } else { 0.1 })));
    }

    #[test]
    fn detector_waits_for_baseline() {
        let mut d = DriftDetector::new(DriftConfig::default());
        assert!((0..10).all(|_| !d.observe(100.0)));
        assert!(d.is_armed());
        assert!((0..4).all(|_| !d.observe(1000.0)));
        assert!(d.observe(1000.0));
    }
}
