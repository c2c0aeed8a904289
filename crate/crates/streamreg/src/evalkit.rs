//! Prequential evaluation and the session metric suite.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::lifecycle::LearnerState;
use crate::stats;
use crate::types::PredictionTriple;

pub const DEFAULT_RESOLUTION: usize = 96;
pub const DEFAULT_FADING: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrequentialMode {
    Plain,
    Fading(f64),
    Window(usize),
}

#[derive(Debug, Clone)]
pub struct PrequentialAccumulator {
    mode: PrequentialMode,
    s: f64,
    n: f64,
    buffer: VecDeque<f64>,
}

impl PrequentialAccumulator {
    pub fn new(mode: PrequentialMode) -> Self {
        match mode {
            PrequentialMode::Fading(d) => assert!(d > 0.0 && d <= 1.0, "fading factor must lie in (0,1]"),
            PrequentialMode::Window(w) => assert!(w > 0, "window size must be positive"),
            PrequentialMode::Plain => {}
        }
        Self { mode, s: 0.0, n: 0.0, buffer: VecDeque::new() }
    }

    pub fn observe(&mut self, loss: f64) {
        match self.mode {
            PrequentialMode::Plain => {
                self.s += loss;
                self.n += 1.0;
            }
            PrequentialMode::Fading(delta) => {
                self.s = loss + delta * self.s;
                self.n = 1.0 + delta * self.n;
            }
            PrequentialMode::Window(size) => {
                self.buffer.push_back(loss);
                if self.buffer.len() > size {
                    self.buffer.pop_front();
                }
            }
        }
    }

    pub fn count(&self) -> f64 {
        match self.mode {
            PrequentialMode::Window(_) => self.buffer.len() as f64,
            _ => self.n,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self.mode {
            PrequentialMode::Window(_) => running_mean(self.buffer.iter().copied()),
            _ => (self.n > 0.0).then(|| self.s / self.n),
        }
    }
}

/// Incremental mean; exact for constant sequences.
fn running_mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let mut m = None;
    for (i, x) in xs.enumerate() {
        m = Some(match m {
            None => x,
            Some(prev) => prev + (x - prev) / (i + 1) as f64,
        });
    }
    m
}

/// Chernoff half-width sqrt(3·ln(2/δ)·μ̂/n).
pub fn chernoff_halfwidth(mu_hat: f64, n: usize, delta_conf: f64) -> f64 {
    assert!(n > 0, "n must be positive");
    assert!(delta_conf > 0.0 && delta_conf < 1.0, "δ must lie in (0,1)");
    (3.0 * (2.0 / delta_conf).ln() * mu_hat / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub target: f64,
    pub triple: PredictionTriple,
    pub phase: LearnerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemTiming {
    pub predict_ms: f64,
    pub update_ms: Option<f64>,
    pub tune_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rmse: Option<f64>,
    pub rmse_st: Option<f64>,
    pub smse: Option<f64>,
    pub smse_st: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundMetrics {
    pub icr: Option<f64>,
    pub aiw: Option<f64>,
    pub saiw: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeMetrics {
    pub apt: f64,
    pub hpt: f64,
    pub tpt: f64,
    pub aut: f64,
    pub hut: f64,
    pub tut: f64,
    pub att: f64,
    pub htt: f64,
    pub ttt: f64,
    pub tt: f64,
    pub atpi: f64,
    pub drmax: f64,
}

/// Every metric of a session; undefined values serialize as null.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub rmse: Option<f64>,
    pub rmse_st: Option<f64>,
    pub smse: Option<f64>,
    pub smse_st: Option<f64>,
    pub icr: Option<f64>,
    pub aiw: Option<f64>,
    pub saiw: Option<f64>,
    pub apt: f64,
    pub hpt: f64,
    pub tpt: f64,
    pub aut: f64,
    pub hut: f64,
    pub tut: f64,
    pub att: f64,
    pub htt: f64,
    pub ttt: f64,
    pub tt: f64,
    pub atpi: f64,
    pub drmax: f64,
}

impl SessionMetrics {
    pub fn assemble(e: ErrorMetrics, b: BoundMetrics, t: TimeMetrics) -> Self {
        Self {
            rmse: e.rmse,
            rmse_st: e.rmse_st,
            smse: e.smse,
            smse_st: e.smse_st,
            icr: b.icr,
            aiw: b.aiw,
            saiw: b.saiw,
            apt: t.apt,
            hpt: t.hpt,
            tpt: t.tpt,
            aut: t.aut,
            hut: t.hut,
            tut: t.tut,
            att: t.att,
            htt: t.htt,
            ttt: t.ttt,
            tt: t.tt,
            atpi: t.atpi,
            drmax: t.drmax,
        }
    }

    /// Metric lookup by its lowercase key.
    pub fn get(&self, key: &str) -> Option<f64> {
        match key {
            "rmse" => self.rmse,
            "rmse_st" => self.rmse_st,
            "smse" => self.smse,
            "smse_st" => self.smse_st,
            "icr" => self.icr,
            "aiw" => self.aiw,
            "saiw" => self.saiw,
            "apt" => Some(self.apt),
            "hpt" => Some(self.hpt),
            "tpt" => Some(self.tpt),
            "aut" => Some(self.aut),
            "hut" => Some(self.hut),
            "tut" => Some(self.tut),
            "att" => Some(self.att),
            "htt" => Some(self.htt),
            "ttt" => Some(self.ttt),
            "tt" => Some(self.tt),
            "atpi" => Some(self.atpi),
            "drmax" => Some(self.drmax),
            _ => None,
        }
    }

    pub const KEYS: [&'static str; 19] = [
        "rmse", "rmse_st", "smse", "smse_st", "icr", "aiw", "saiw", "apt", "hpt", "tpt", "aut", "hut", "tut", "att",
        "htt", "ttt", "tt", "atpi", "drmax",
    ];
}

pub fn compute_error_metrics(records: &[ItemRecord]) -> ErrorMetrics {
    let targets: Vec<f64> = records.iter().map(|r| r.target).collect();
    let sq: Vec<f64> = records.iter().map(|r| (r.target - r.triple.point).powi(2)).collect();
    let sq_st: Vec<f64> = records
        .iter()
        .zip(&sq)
        .filter(|(r, _)| r.phase == LearnerState::Stable)
        .map(|(_, s)| *s)
        .collect();
    let mse = stats::mean(&sq);
    let mse_st = stats::mean(&sq_st);
    let var = stats::variance(&targets).filter(|v| *v > 0.0);
    ErrorMetrics {
        rmse: mse.map(f64::sqrt),
        rmse_st: mse_st.map(f64::sqrt),
        smse: mse.zip(var).map(|(m, v)| m / v),
        smse_st: mse_st.zip(var).map(|(m, v)| m / v),
    }
}

pub fn compute_bound_metrics(records: &[ItemRecord]) -> BoundMetrics {
    if records.is_empty() {
        return BoundMetrics::default();
    }
    let n = records.len() as f64;
    let inside = records.iter().filter(|r| r.triple.contains(r.target)).count() as f64;
    let aiw = records.iter().map(|r| r.triple.width()).sum::<f64>() / n;
    let mu = records.iter().map(|r| r.target).sum::<f64>() / n;
    BoundMetrics { icr: Some(inside / n), aiw: Some(aiw), saiw: (mu != 0.0).then(|| aiw / mu) }
}

fn summarize(xs: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let (mut total, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for x in xs {
        total += x;
        max = max.max(x);
        n += 1;
    }
    let avg = if n == 0 { 0.0 } else { total / n as f64 };
    (avg, max, total)
}

pub fn compute_time_metrics(timings: &[ItemTiming], item_count: usize) -> TimeMetrics {
    assert!(item_count > 0, "item count must be positive");
    let (apt, hpt, tpt) = summarize(timings.iter().map(|t| t.predict_ms));
    let (aut, hut, tut) = summarize(timings.iter().filter_map(|t| t.update_ms));
    let (att, htt, ttt) = summarize(timings.iter().filter_map(|t| t.tune_ms));
    let tt = tpt + tut + ttt;
    let atpi = tt / item_count as f64;
    TimeMetrics { apt, hpt, tpt, aut, hut, tut, att, htt, ttt, tt, atpi, drmax: 1.0 / atpi }
}

/// Sliding-window RMSE after every item.
pub fn windowed_rmse_trace(records: &[ItemRecord], resolution: usize) -> Vec<f64> {
    let mut acc = PrequentialAccumulator::new(PrequentialMode::Window(resolution));
    records
        .iter()
        .map(|r| {
            acc.observe((r.target - r.triple.point).powi(2));
            acc.mean().map_or(0.0, f64::sqrt)
        })
        .collect()
}
