use std::time::Instant;

use serde::{Deserialize, Serialize};
use streamreg::evalkit::{
    compute_bound_metrics, compute_error_metrics, compute_time_metrics, windowed_rmse_trace, ItemRecord, ItemTiming,
    SessionMetrics, DEFAULT_RESOLUTION,
};
use streamreg::{LearnerConfig, LearnerError, LearnerState, ObservedPair, OnlineLearner, PredictionTriple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    pub triples: Vec<PredictionTriple>,
    pub targets: Vec<f64>,
    pub phases: Vec<LearnerState>,
    pub timings: Vec<ItemTiming>,
    pub windowed_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub learner: String,
    pub dataset: String,
    pub metrics: SessionMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Traces>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionReport {
    pub fn failed(learner: &str, dataset: &str, error: impl ToString) -> Self {
        Self {
            learner: learner.to_string(),
            dataset: dataset.to_string(),
            metrics: SessionMetrics::default(),
            traces: None,
            error: Some(error.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Copy with wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        let m = &mut r.metrics;
        for v in [
            &mut m.apt, &mut m.hpt, &mut m.tpt, &mut m.aut, &mut m.hut, &mut m.tut, &mut m.att, &mut m.htt, &mut m.ttt,
            &mut m.tt, &mut m.atpi, &mut m.drmax,
        ] {
            *v = 0.0;
        }
        if let Some(t) = r.traces.as_mut() {
            t.timings.iter_mut().for_each(|x| *x = ItemTiming::default());
        }
        r
    }
}

/// Per-item outcome of a stream simulation.
#[derive(Debug, Clone, Default)]
pub struct Simulation {
    pub records: Vec<ItemRecord>,
    pub timings: Vec<ItemTiming>,
}

impl Simulation {
    pub fn metrics(&self) -> SessionMetrics {
        SessionMetrics::assemble(
            compute_error_metrics(&self.records),
            compute_bound_metrics(&self.records),
            compute_time_metrics(&self.timings, self.records.len().max(1)),
        )
    }

    pub fn windowed_rmse(&self, resolution: usize) -> Vec<f64> {
        windowed_rmse_trace(&self.records, resolution)
    }

    pub fn traces(&self) -> Traces {
        Traces {
            triples: self.records.iter().map(|r| r.triple).collect(),
            targets: self.records.iter().map(|r| r.target).collect(),
            phases: self.records.iter().map(|r| r.phase).collect(),
            timings: self.timings.clone(),
            windowed_rmse: self.windowed_rmse(DEFAULT_RESOLUTION),
        }
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs the predict-then-observe protocol over a stream with a prepared learner.
/// The phase recorded for an item is the one in force when it was predicted.
pub fn run_with_learner(learner: &mut dyn OnlineLearner, stream: &[ObservedPair]) -> Result<Simulation, LearnerError> {
    let mut sim = Simulation { records: Vec::with_capacity(stream.len()), timings: Vec::with_capacity(stream.len()) };
    for pair in stream {
        let phase = learner.phase();
        let start = Instant::now();
        let triple = learner.predict(&pair.point)?;
        let predict_ms = ms(start.elapsed());
        if !(triple.point.is_finite()) {
            return Err(LearnerError::NonFinite("point prediction"));
        }
        let activity = learner.observe(pair, &triple)?;
        sim.records.push(ItemRecord { target: pair.target, triple, phase });
        sim.timings.push(ItemTiming {
            predict_ms,
            update_ms: activity.update.map(ms),
            tune_ms: activity.tune.map(ms),
        });
    }
    Ok(sim)
}

pub fn simulate(config: &LearnerConfig, stream: &[ObservedPair]) -> Result<Simulation, String> {
    let d = stream.first().ok_or("empty stream")?.point.dim();
    if let Some((i, p)) = stream.iter().enumerate().find(|(_, p)| p.point.dim() != d) {
        return Err(format!("item {i} has {} features, expected {d}", p.point.dim()));
    }
    let mut learner = config.build(d).map_err(|e| e.to_string())?;
    run_with_learner(learner.as_mut(), stream).map_err(|e| e.to_string())
}

pub fn run_session(config: &LearnerConfig, dataset: &str, stream: &[ObservedPair], trace: bool) -> SessionReport {
    let learner = config.codename();
    match simulate(config, stream) {
        Ok(sim) => SessionReport {
            learner,
            dataset: dataset.to_string(),
            metrics: sim.metrics(),
            traces: trace.then(|| sim.traces()),
            error: None,
        },
        Err(e) => SessionReport::failed(&learner, dataset, e),
    }
}
