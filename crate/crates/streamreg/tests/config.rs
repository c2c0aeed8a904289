use streamreg::config::{batch_controls, online_variants};
use streamreg::datagen::DatasetSpec;
use streamreg::{Adaptation, Family, LearnerConfig, LearnerState};

#[test]
fn every_roster_codename_round_trips() {
    for c in online_variants().into_iter().chain(batch_controls()) {
        let name = c.codename();
        let back: LearnerConfig = name.parse().unwrap();
        assert_eq!(back.codename(), name);
        assert_eq!(back.family, c.family);
        assert_eq!(back.adaptation, c.adaptation);
        assert_eq!(back.feature_mapping, c.feature_mapping);
        assert_eq!(back.high_conf, c.high_conf);
    }
}

#[test]
fn example_codenames() {
    let c: LearnerConfig = "GPRegressionGaussianKernelZeroMean_WS64".parse().unwrap();
    assert_eq!((c.family, c.adaptation), (Family::GpRegression, Adaptation::Window(64)));
    let c: LearnerConfig = "KernelRegression_HighConf_WS96".parse().unwrap();
    assert!(c.high_conf);
    assert_eq!(c.window_size(), Some(96));
    let c: LearnerConfig = "BayesianMAPForgettingMapped_FF0.05".parse().unwrap();
    assert_eq!((c.family, c.adaptation, c.feature_mapping), (Family::BayesianMap, Adaptation::Forgetting(0.05), true));
    assert!("NoSuchLearner_WS64".parse::<LearnerConfig>().is_err());
}

#[test]
fn every_learner_runs_a_short_stream() {
    let stream = "SYNTH_ND_CD_300_2_10_1_11".parse::<DatasetSpec>().unwrap().with_seed(3).generate().unwrap();
    for c in online_variants().into_iter().chain(batch_controls()).filter(|c| c.window_size().unwrap_or(32) <= 64) {
        let mut learner = c.build(2).unwrap();
        let mut left_cold_start = false;
        for p in &stream {
            let t = learner.predict(&p.point).unwrap();
            assert!(t.lower <= t.point && t.point <= t.upper);
            assert!(t.point.is_finite());
            learner.observe(p, &t).unwrap();
            left_cold_start |= learner.phase() != LearnerState::ColdStart;
        }
        assert!(left_cold_start, "{}", c.codename());
    }
}
