use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn streamreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamreg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = streamreg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn gen_single_dataset_is_deterministic() {
    let a = ok(&["gen", "--dataset", "SYNTH_ND_NCD_50_2_10_1_11", "--seed", "3"]);
    let b = ok(&["gen", "--dataset", "SYNTH_ND_NCD_50_2_10_1_11", "--seed", "3"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 51);
    assert_ne!(a, ok(&["gen", "--dataset", "SYNTH_ND_NCD_50_2_10_1_11", "--seed", "4"]));
}

#[test]
fn gen_suite_writes_every_dataset() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--suite", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 576);
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        assert_eq!(path.extension().unwrap(), "csv");
        assert!(path.file_stem().unwrap().to_str().unwrap().starts_with("SYNTH_"));
    }
}

#[test]
fn run_named_dataset_prints_report() {
    let out = ok(&["run", "--learner", "KernelRegression_WS32", "--dataset", "SYNTH_ND_NCD_300_1_10_1_11", "--seed", "2"]);
    let v = json(&out);
    assert_eq!(v["learner"], "KernelRegression_WS32");
    assert_eq!(v["dataset"], "SYNTH_ND_NCD_300_1_10_1_11");
    assert!(v["metrics"]["smse"].as_f64().unwrap() < 1.0);
    assert!(v.get("traces").is_none());
    let traced = json(&ok(&["run", "--learner", "KernelRegression_WS32", "--dataset", "SYNTH_ND_NCD_300_1_10_1_11", "--trace"]));
    assert_eq!(traced["traces"]["targets"].as_array().unwrap().len(), 300);
}

#[test]
fn run_on_generated_csv_matches_named_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stream.csv");
    let name = "SYNTH_D_NCD_200_2_50_1_12";
    ok(&["gen", "--dataset", name, "--seed", "9", "--out", csv.to_str().unwrap()]);
    let run = |d: &str| json(&ok(&["run", "--learner", "BayesianMLEWindowed_WS32", "--dataset", d, "--seed", "9", "--schema", "dims=2"]));
    let from_file = run(csv.to_str().unwrap());
    let named = run(name);
    assert_eq!(from_file["dataset"], "stream");
    assert_eq!(from_file["metrics"]["smse"], named["metrics"]["smse"]);
    assert_eq!(from_file["metrics"]["icr"], named["metrics"]["icr"]);
}

#[test]
fn run_rejects_unknown_learner() {
    let out = streamreg(&["run", "--learner", "Nope_WS3", "--dataset", "SYNTH_ND_NCD_300_1_10_1_11"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn matrix_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let roster = dir.path().join("roster.txt");
    write(&roster, "# shortlist\nKernelRegression_WS32\n\nGPRegressionGaussianKernelZeroMean_WS32\n");
    let out_dir = dir.path().join("out");
    ok(&[
        "matrix",
        "--learners",
        roster.to_str().unwrap(),
        "--datasets",
        "SYNTH_ND_NCD_200_1_10_1_11,SYNTH_D_CD_200_2_50_3_13,SYNTH_ND_CD_200_4_100_0_22",
        "--parallel",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let reports_path = out_dir.join("reports.json");
    let reports = json(&fs::read_to_string(&reports_path).unwrap());
    assert_eq!(reports.as_array().unwrap().len(), 6);
    let table = ok(&["aggregate", reports_path.to_str().unwrap(), "--group-by", "family"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("group,sessions,failed"));
    assert!(table.contains("KernelRegression,3,0"));
    let by_two = ok(&["aggregate", reports_path.to_str().unwrap(), "--group-by", "window,dims"]);
    assert_eq!(by_two.lines().count(), 4);
}

#[test]
fn matrix_suite_with_short_streams() {
    let dir = tempfile::tempdir().unwrap();
    let roster = dir.path().join("roster.txt");
    write(&roster, "MeanPredictor\n");
    ok(&["matrix", "--learners", roster.to_str().unwrap(), "--suite", "--size", "50", "--out", dir.path().to_str().unwrap()]);
    let reports = json(&fs::read_to_string(dir.path().join("reports.json")).unwrap());
    assert_eq!(reports.as_array().unwrap().len(), 576);
}

#[test]
fn ingest_converts_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("runs.csv");
    write(&input, "operator,device,rows,runtime\nscan,gpu0,100,1.5\njoin,cpu,200,4.0\n");
    let out = ok(&["ingest", input.to_str().unwrap(), "--schema", "dims=1"]);
    assert_eq!(out.lines().count(), 3);
    let last: Vec<f64> = out.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last, vec![200.0, 4.0]);
    write(&input, "rows,runtime\n100,1.5\n200,-4.0\n");
    let bad = streamreg(&["ingest", input.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains('3'));
}
