use streamreg::datagen::DatasetSpec;
use streamreg::error::LearnerError;
use streamreg::lifecycle::Activity;
use streamreg::{DataPoint, LearnerConfig, LearnerState, ObservedPair, OnlineLearner, PredictionTriple};
use streamreg_sim::session::simulate;
use streamreg_sim::{run_session, run_with_learner, SessionReport};

fn stream(name: &str, seed: u64) -> Vec<ObservedPair> {
    name.parse::<DatasetSpec>().unwrap().with_seed(seed).generate().unwrap()
}

#[test]
fn mean_predictor_smse_is_about_one() {
    for (name, seed) in [("SYNTH_ND_NCD_2000_2_50_1_11", 1), ("SYNTH_D_NCD_2000_4_100_5_24", 2), ("SYNTH_ND_NCD_2000_1_10_3_33", 3)] {
        let r = run_session(&LearnerConfig::mean_predictor(), name, &stream(name, seed), false);
        let smse = r.metrics.smse.unwrap();
        assert!((0.95..1.1).contains(&smse), "{name}: {smse}");
    }
}

#[test]
fn windowed_mle_recovers_noise_free_linear_stream() {
    let cfg: LearnerConfig = "BayesianMLEWindowed_WS64".parse().unwrap();
    for seed in 0..5 {
        let r = run_session(&cfg, "n/a", &stream("SYNTH_ND_NCD_2000_2_50_0_11", seed), false);
        assert!(r.metrics.smse_st.unwrap() < 0.01);
    }
}

#[test]
fn frozen_batch_learner_degrades_after_drift() {
    let cfg: LearnerConfig = "BayesianMLEBatch_TS64".parse().unwrap();
    let mut degraded = 0;
    for seed in 1u64..=10 {
        let sim = simulate(&cfg, &stream("SYNTH_ND_CD_2000_2_10_1_11", seed)).unwrap();
        let trace = sim.windowed_rmse(96);
        let pre = trace[999];
        let post = trace[1096..].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(post >= 2.0 * pre, "seed {seed}: pre {pre} post {post}");
        if post >= 5.0 * pre {
            degraded += 1;
        }
    }
    assert!(degraded >= 8, "{degraded}");
}

#[test]
fn phase_is_recorded_at_prediction_time() {
    let cfg: LearnerConfig = "BayesianMLEWindowed_WS32".parse().unwrap();
    let sim = simulate(&cfg, &stream("SYNTH_ND_NCD_200_1_10_1_11", 0)).unwrap();
    assert!(sim.records[..32].iter().all(|r| r.phase == LearnerState::ColdStart));
    assert_eq!(sim.records[32].phase, LearnerState::Stable);
    assert!(sim.timings[31].tune_ms.is_some());
}

#[test]
fn empty_and_ragged_streams_fail_cleanly() {
    let cfg = LearnerConfig::mean_predictor();
    let r = run_session(&cfg, "empty", &[], false);
    assert!(!r.is_ok());
    let ragged = vec![ObservedPair::new(vec![1.0], 1.0), ObservedPair::new(vec![1.0, 2.0], 1.0)];
    let r = run_session(&cfg, "ragged", &ragged, false);
    assert!(r.error.unwrap().contains("item 1"));
    let cfg: LearnerConfig = "BayesianMLEWindowedMapped_WS32".parse().unwrap();
    let negative = vec![ObservedPair::new(vec![-1.0], 1.0); 3];
    assert!(!run_session(&cfg, "neg", &negative, false).is_ok());
}

#[derive(Default)]
struct Recorder {
    log: Vec<String>,
    pending: Option<Vec<f64>>,
    seen_targets: usize,
}

impl OnlineLearner for Recorder {
    fn phase(&self) -> LearnerState {
        LearnerState::Stable
    }

    fn predict(&mut self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        assert!(self.pending.is_none(), "two predictions without an observation");
        self.pending = Some(x.features.clone());
        self.log.push("predict".into());
        Ok(PredictionTriple::exact(self.seen_targets as f64))
    }

    fn observe(&mut self, pair: &ObservedPair, predicted: &PredictionTriple) -> Result<Activity, LearnerError> {
        let x = self.pending.take().expect("observation without prediction");
        assert_eq!(x, pair.point.features);
        assert_eq!(predicted.point, self.seen_targets as f64);
        self.seen_targets += 1;
        self.log.push("observe".into());
        Ok(Activity::default())
    }
}

#[test]
fn protocol_fidelity() {
    let s = stream("SYNTH_ND_NCD_100_2_10_1_11", 0);
    let mut rec = Recorder::default();
    let sim = run_with_learner(&mut rec, &s).unwrap();
    assert_eq!(rec.log.len(), 200);
    assert!(rec.log.chunks(2).all(|c| c[0] == "predict" && c[1] == "observe"));
    for (i, r) in sim.records.iter().enumerate() {
        assert_eq!(r.triple.point, i as f64);
        assert_eq!(r.target, s[i].target);
    }
}

#[test]
fn report_json_round_trip() {
    let cfg: LearnerConfig = "KernelRegression_HighConf_WS32".parse().unwrap();
    let r = run_session(&cfg, "SYNTH_ND_NCD_300_1_10_1_11", &stream("SYNTH_ND_NCD_300_1_10_1_11", 1), true);
    let json = serde_json::to_string(&r).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["learner"], "KernelRegression_HighConf_WS32");
    for key in streamreg::evalkit::SessionMetrics::KEYS {
        assert!(value["metrics"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["traces"]["targets"].as_array().unwrap().len(), 300);
    let back: SessionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    let bare = run_session(&cfg, "x", &stream("SYNTH_ND_NCD_300_1_10_1_11", 1), false);
    assert!(serde_json::to_value(&bare).unwrap().get("traces").is_none());
    let learner: LearnerConfig = back.learner.parse().unwrap();
    assert_eq!(learner.codename(), back.learner);
}
