//! Learner configurations, their codenames, and the factory that turns a
//! configuration into a running learner.
//!
//! Codenames:
//! - `BayesianMLEWindowed_WS64`, `BayesianMAPForgettingMapped_FF0.05`
//! - `GPRegressionGaussianKernelZeroMean_WS64` (also `GPRegressionZeroMean_WS64`)
//! - `KernelRegression_WS96`, `KernelRegression_HighConf_WS96`
//! - `BayesianMLEBatchMapped_TS64`, `GPRegressionBatch_TS64`, `KernelRegressionBatch_TS96`
//! - `MeanPredictor`

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::baseline::MeanModel;
use crate::gp::{GpState, MeanKind};
use crate::kreg::KregState;
use crate::lifecycle::{DriftConfig, ForgettingLearner, FrozenLearner, OnlineLearner, WindowedLearner};
use crate::parametric::{Estimator, ForgettingParametric, WindowedParametric, DEFAULT_BURN_IN};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    BayesianMle,
    BayesianMap,
    GpRegression,
    KernelRegression,
    MeanPredictor,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::BayesianMle => "BayesianMLE",
            Family::BayesianMap => "BayesianMAP",
            Family::GpRegression => "GPRegression",
            Family::KernelRegression => "KernelRegression",
            Family::MeanPredictor => "MeanPredictor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adaptation {
    Window(usize),
    Forgetting(f64),
    /// Batch control trained on the first `n` items and frozen afterwards.
    Batch(usize),
    /// Running statistics over everything seen.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub family: Family,
    pub adaptation: Adaptation,
    pub feature_mapping: bool,
    pub gp_mean: MeanKind,
    pub high_conf: bool,
    pub confidence: f64,
    pub drift: DriftConfig,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unrecognized learner codename {0:?}")]
    UnknownCodename(String),
    #[error("invalid learner configuration: {0}")]
    Invalid(String),
}

impl LearnerConfig {
    fn base(family: Family, adaptation: Adaptation) -> Self {
        Self {
            family,
            adaptation,
            feature_mapping: false,
            gp_mean: MeanKind::Zero,
            high_conf: false,
            confidence: DEFAULT_CONFIDENCE,
            drift: DriftConfig::default(),
            seed: 0,
        }
    }

    pub fn parametric_windowed(estimator: Estimator, window: usize, mapped: bool) -> Self {
        let mut c = Self::base(estimator_family(estimator), Adaptation::Window(window));
        c.feature_mapping = mapped;
        c
    }

    pub fn parametric_forgetting(estimator: Estimator, alpha: f64, mapped: bool) -> Self {
        let mut c = Self::base(estimator_family(estimator), Adaptation::Forgetting(alpha));
        c.feature_mapping = mapped;
        c
    }

    pub fn parametric_batch(estimator: Estimator, train: usize, mapped: bool) -> Self {
        let mut c = Self::base(estimator_family(estimator), Adaptation::Batch(train));
        c.feature_mapping = mapped;
        c
    }

    pub fn gp(mean: MeanKind, window: usize) -> Self {
        let mut c = Self::base(Family::GpRegression, Adaptation::Window(window));
        c.gp_mean = mean;
        c
    }

    pub fn gp_batch(train: usize) -> Self {
        Self::base(Family::GpRegression, Adaptation::Batch(train))
    }

    pub fn kreg(window: usize, high_conf: bool) -> Self {
        let mut c = Self::base(Family::KernelRegression, Adaptation::Window(window));
        c.high_conf = high_conf;
        c
    }

    pub fn kreg_batch(train: usize) -> Self {
        Self::base(Family::KernelRegression, Adaptation::Batch(train))
    }

    pub fn mean_predictor() -> Self {
        Self::base(Family::MeanPredictor, Adaptation::Cumulative)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn codename(&self) -> String {
        self.to_string()
    }

    /// Window or training-set size, if the configuration has one.
    pub fn window_size(&self) -> Option<usize> {
        match self.adaptation {
            Adaptation::Window(n) | Adaptation::Batch(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_batch(&self) -> bool {
        matches!(self.adaptation, Adaptation::Batch(_))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)");
        }
        match (self.family, self.adaptation) {
            (Family::MeanPredictor, Adaptation::Cumulative) => {}
            (Family::MeanPredictor, _) | (_, Adaptation::Cumulative) => {
                return bad("only the mean predictor accumulates without a window")
            }
            (Family::GpRegression | Family::KernelRegression, Adaptation::Forgetting(_)) => {
                return bad("non-parametric learners need a window")
            }
            (_, Adaptation::Window(n) | Adaptation::Batch(n)) if n < 2 => return bad("window must hold at least 2 points"),
            (_, Adaptation::Forgetting(a)) if !(0.0..1.0).contains(&a) => {
                return bad("forgetting factor must lie in [0, 1)")
            }
            _ => {}
        }
        if self.feature_mapping && !matches!(self.family, Family::BayesianMle | Family::BayesianMap) {
            return bad("feature mapping applies to parametric learners only");
        }
        if self.high_conf && self.family != Family::KernelRegression {
            return bad("the high-confidence flag applies to kernel regression only");
        }
        Ok(())
    }

    /// Builds a fresh learner for a `d`-dimensional stream.
    pub fn build(&self, d: usize) -> Result<Box<dyn OnlineLearner>, ConfigError> {
        self.validate()?;
        let conf = self.confidence;
        let mapped = self.feature_mapping;
        let learner: Box<dyn OnlineLearner> = match (self.family, self.adaptation) {
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Window(w)) => Box::new(WindowedLearner::new(
                WindowedParametric::new(self.estimator(), d, w, mapped, conf),
                self.drift,
            )),
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Forgetting(a)) => Box::new(ForgettingLearner::new(
                ForgettingParametric::new(self.estimator(), d, a, mapped, DEFAULT_BURN_IN),
            )),
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Batch(n)) => {
                Box::new(FrozenLearner::new(WindowedParametric::new(self.estimator(), d, n, mapped, conf)))
            }
            (Family::GpRegression, Adaptation::Window(w)) => {
                Box::new(WindowedLearner::new(GpState::new(d, w, self.gp_mean, conf, self.seed), self.drift))
            }
            (Family::GpRegression, Adaptation::Batch(n)) => {
                Box::new(FrozenLearner::new(GpState::new(d, n, self.gp_mean, conf, self.seed)))
            }
            (Family::KernelRegression, Adaptation::Window(w)) => {
                Box::new(WindowedLearner::new(KregState::new(d, w, self.high_conf), self.drift))
            }
            (Family::KernelRegression, Adaptation::Batch(n)) => {
                Box::new(FrozenLearner::new(KregState::new(d, n, self.high_conf)))
            }
            (Family::MeanPredictor, _) => Box::new(ForgettingLearner::new(MeanModel::new(conf))),
            _ => unreachable!("rejected by validate"),
        };
        Ok(learner)
    }

    fn estimator(&self) -> Estimator {
        if self.family == Family::BayesianMap {
            Estimator::Map
        } else {
            Estimator::Mle
        }
    }
}

fn estimator_family(e: Estimator) -> Family {
    match e {
        Estimator::Mle => Family::BayesianMle,
        Estimator::Map => Family::BayesianMap,
    }
}

fn format_factor(a: f64) -> String {
    if a.fract() == 0.0 {
        format!("{a:.1}")
    } else {
        format!("{a}")
    }
}

fn mean_label(m: MeanKind) -> &'static str {
    match m {
        MeanKind::Zero => "Zero",
        MeanKind::Average => "Avg",
        MeanKind::Ols => "OLS",
    }
}

impl fmt::Display for LearnerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mapped = if self.feature_mapping { "Mapped" } else { "" };
        match (self.family, self.adaptation) {
            (Family::MeanPredictor, _) => write!(f, "MeanPredictor"),
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Window(w)) => {
                write!(f, "{}Windowed{mapped}_WS{w}", self.family.label())
            }
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Forgetting(a)) => {
                write!(f, "{}Forgetting{mapped}_FF{}", self.family.label(), format_factor(a))
            }
            (Family::BayesianMle | Family::BayesianMap, Adaptation::Batch(n)) => {
                write!(f, "{}Batch{mapped}_TS{n}", self.family.label())
            }
            (Family::GpRegression, Adaptation::Window(w)) => {
                write!(f, "GPRegressionGaussianKernel{}Mean_WS{w}", mean_label(self.gp_mean))
            }
            (Family::GpRegression, Adaptation::Batch(n)) => match self.gp_mean {
                MeanKind::Zero => write!(f, "GPRegressionBatch_TS{n}"),
                m => write!(f, "GPRegressionBatch{}Mean_TS{n}", mean_label(m)),
            },
            (Family::KernelRegression, Adaptation::Window(w)) => {
                let hc = if self.high_conf { "_HighConf" } else { "" };
                write!(f, "KernelRegression{hc}_WS{w}")
            }
            (Family::KernelRegression, Adaptation::Batch(n)) => {
                let hc = if self.high_conf { "_HighConf" } else { "" };
                write!(f, "KernelRegressionBatch{hc}_TS{n}")
            }
            (family, adaptation) => write!(f, "{}<{adaptation:?}>", family.label()),
        }
    }
}

fn parse_mean(s: &str) -> Option<MeanKind> {
    match s {
        "Zero" => Some(MeanKind::Zero),
        "Avg" => Some(MeanKind::Average),
        "OLS" => Some(MeanKind::Ols),
        _ => None,
    }
}

impl FromStr for LearnerConfig {
    type Err = ConfigError;

    fn from_str(name: &str) -> Result<Self, ConfigError> {
        let unknown = || ConfigError::UnknownCodename(name.to_string());
        if name == "MeanPredictor" {
            return Ok(Self::mean_predictor());
        }
        if let Some(w) = name.strip_prefix("KernelRegressionWS") {
            let c = Self::kreg(w.parse().map_err(|_| unknown())?, false);
            c.validate()?;
            return Ok(c);
        }
        let (head, tail) = name.rsplit_once('_').ok_or_else(unknown)?;
        let (tag, num) = tail.split_at(tail.len().min(2));
        let count = || num.parse::<usize>().map_err(|_| unknown());

        let config = if let Some(rest) = head.strip_prefix("BayesianMLE").map(|r| (Estimator::Mle, r)).or_else(|| {
            head.strip_prefix("BayesianMAP").map(|r| (Estimator::Map, r))
        }) {
            let (estimator, rest) = rest;
            let (kind, mapped) = match rest.strip_suffix("Mapped") {
                Some(k) => (k, true),
                None => (rest, false),
            };
            match (kind, tag) {
                ("Windowed", "WS") => Self::parametric_windowed(estimator, count()?, mapped),
                ("Forgetting", "FF") => {
                    let a: f64 = num.parse().map_err(|_| unknown())?;
                    Self::parametric_forgetting(estimator, a, mapped)
                }
                ("Batch", "TS") => Self::parametric_batch(estimator, count()?, mapped),
                _ => return Err(unknown()),
            }
        } else if let Some(rest) = head.strip_prefix("GPRegression") {
            if tag == "TS" {
                let mut c = Self::gp_batch(count()?);
                match rest {
                    "Batch" => {}
                    r => {
                        let m = r.strip_prefix("Batch").and_then(|m| m.strip_suffix("Mean")).and_then(parse_mean);
                        c.gp_mean = m.ok_or_else(unknown)?;
                    }
                }
                c
            } else if tag == "WS" {
                let rest = rest.strip_prefix("GaussianKernel").unwrap_or(rest);
                let mean = rest.strip_suffix("Mean").and_then(parse_mean).ok_or_else(unknown)?;
                Self::gp(mean, count()?)
            } else {
                return Err(unknown());
            }
        } else if head.starts_with("KernelRegression") {
            match (head, tag) {
                ("KernelRegression", "WS") => Self::kreg(count()?, false),
                ("KernelRegression_HighConf", "WS") => Self::kreg(count()?, true),
                ("KernelRegressionBatch", "TS") => Self::kreg_batch(count()?),
                ("KernelRegressionBatch_HighConf", "TS") => {
                    let mut c = Self::kreg_batch(count()?);
                    c.high_conf = true;
                    c
                }
                _ => return Err(unknown()),
            }
        } else {
            return Err(unknown());
        };
        config.validate()?;
        Ok(config)
    }
}

/// The 52 online variants evaluated in the study.
pub fn online_variants() -> Vec<LearnerConfig> {
    const WINDOWS: [usize; 5] = [32, 48, 64, 96, 128];
    const FACTORS: [f64; 3] = [0.0, 0.05, 0.1];
    let mut out = Vec::new();
    for est in [Estimator::Mle, Estimator::Map] {
        for mapped in [false, true] {
            out.extend(FACTORS.iter().map(|&a| LearnerConfig::parametric_forgetting(est, a, mapped)));
            out.extend(WINDOWS.iter().map(|&w| LearnerConfig::parametric_windowed(est, w, mapped)));
        }
    }
    for mean in [MeanKind::Zero, MeanKind::Average, MeanKind::Ols] {
        out.extend(WINDOWS.iter().map(|&w| LearnerConfig::gp(mean, w)));
    }
    out.extend(WINDOWS.iter().map(|&w| LearnerConfig::kreg(w, false)));
    out
}

/// The 12 frozen batch controls.
pub fn batch_controls() -> Vec<LearnerConfig> {
    let mut out = Vec::new();
    for n in [32, 64, 128] {
        out.push(LearnerConfig::parametric_batch(Estimator::Mle, n, false));
        out.push(LearnerConfig::parametric_batch(Estimator::Mle, n, true));
        out.push(LearnerConfig::gp_batch(n));
        out.push(LearnerConfig::kreg_batch(n));
    }
    out
}
