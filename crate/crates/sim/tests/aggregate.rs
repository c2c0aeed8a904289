use streamreg::evalkit::SessionMetrics;
use streamreg_sim::aggregate::to_csv;
use streamreg_sim::{aggregate, GroupBy, SessionReport};

fn report(learner: &str, dataset: &str, smse: Option<f64>, icr: f64) -> SessionReport {
    let metrics = SessionMetrics { smse, icr: Some(icr), atpi: 0.01, ..Default::default() };
    SessionReport { learner: learner.into(), dataset: dataset.into(), metrics, traces: None, error: None }
}

fn sample() -> Vec<SessionReport> {
    vec![
        report("KernelRegression_WS64", "SYNTH_ND_NCD_2000_1_10_1_11", Some(0.2), 0.9),
        report("KernelRegression_WS96", "SYNTH_ND_NCD_2000_2_10_3_11", Some(0.4), 0.8),
        report("BayesianMLEWindowed_WS64", "SYNTH_D_NCD_2000_2_50_1_13", Some(0.6), 0.7),
        report("BayesianMLEWindowed_WS64", "SYNTH_D_NCD_2000_4_50_1_13", None, 0.5),
        SessionReport::failed("BayesianMLEWindowed_WS32", "SYNTH_D_NCD_2000_4_50_1_13", "boom"),
    ]
}

fn row<'a>(rows: &'a [streamreg_sim::AggregateRow], group: &str) -> &'a streamreg_sim::AggregateRow {
    rows.iter().find(|r| r.group == group).unwrap_or_else(|| panic!("no group {group}"))
}

#[test]
fn family_means() {
    let rows = aggregate(&sample(), &[GroupBy::Family]);
    let k = row(&rows, "KernelRegression");
    assert!((k.means["smse"] - 0.3).abs() < 1e-15);
    assert!((k.means["icr"] - 0.85).abs() < 1e-15);
    let b = row(&rows, "BayesianMLEWindowed");
    assert_eq!(b.sessions, 3);
    assert_eq!(b.failed, 1);
    assert_eq!(b.counts["smse"], 1);
    assert_eq!(b.means["smse"], 0.6);
    assert!((b.means["icr"] - 0.6).abs() < 1e-15);
}

#[test]
fn single_report_groups_equal_report_values() {
    let rows = aggregate(&sample()[..3], &[GroupBy::Window, GroupBy::Dims]);
    assert_eq!(row(&rows, "WS96/2").means["smse"], 0.4);
    assert_eq!(row(&rows, "WS64/1").means["smse"], 0.2);
}

#[test]
fn noise_grouping() {
    let rows = aggregate(&sample(), &[GroupBy::Noise]);
    assert_eq!(row(&rows, "3").means["smse"], 0.4);
}

#[test]
fn permutation_invariant() {
    let base = sample();
    let want = aggregate(&base, &[GroupBy::Family]);
    let mut shuffled = base.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    assert_eq!(aggregate(&shuffled, &[GroupBy::Family]), want);
}

#[test]
fn group_by_parsing_and_csv() {
    for k in ["family", "window", "dims", "noise"] {
        let g: GroupBy = k.parse().unwrap();
        assert_eq!(g.to_string(), k);
    }
    assert!("colour".parse::<GroupBy>().is_err());
    let csv = to_csv(&aggregate(&sample(), &[GroupBy::Family]));
    assert!(csv.lines().next().unwrap().starts_with("group,sessions,failed"));
    assert_eq!(csv.lines().count(), 3);
}
