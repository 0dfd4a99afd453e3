use std::path::Path;
use std::process::{Command, Output};

fn srra(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srra"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SRRA_OUT_DIR")
        .output()
        .unwrap()
}

#[test]
fn run_writes_record_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = srra(&["run", "--task", "lrpp", "--n", "8", "--iterations", "2", "--out-dir", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record = srra_harness::run::read_run(&dir.path().join("o/run.json")).unwrap();
    assert_eq!(record.trajectory.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("o/run_trajectory.csv")).unwrap();
    assert!(csv.starts_with("iteration,err,excess,distinct_queries,cumulative_queries,wall_ms"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"task":"clustering","n":10,"k":3,"params":{"epsilon":0.2,"iterations":2,"master_seed":5}}"#,
    )
    .unwrap();
    let a = srra(&["run", "--config", "c.json", "--out-dir", "a"], dir.path());
    let b = srra(
        &["run", "--task", "clustering", "--n", "10", "--k", "3", "--iterations", "2", "--seed", "5", "--out-dir", "b"],
        dir.path(),
    );
    assert!(a.status.success() && b.status.success());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("run.json")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_srra"))
        .args(["run", "--n", "6", "--iterations", "1"])
        .current_dir(dir.path())
        .env("SRRA_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/run.json").exists());
}

#[test]
fn invalid_config_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = srra(&["run", "--epsilon", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.epsilon"));

    std::fs::write(dir.path().join("bad.json"), r#"{"task":"lrpp","n":8,"params":{"epsilon":0.1,"iterations":"x"}}"#)
        .unwrap();
    let out = srra(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.iterations"));

    let out = srra(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = srra(&["verify", "sandwich", "--trials", "200"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS"));
    let unknown = srra(&["verify", "nope"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    let json = srra(&["verify", "exhaustive-lrpp", "--json"], dir.path());
    let report: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(report["suite"], "exhaustive-lrpp");
}

#[test]
fn oracle_gen_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = srra(
        &["oracle-gen", "--task", "lrpp", "--n", "10", "--noise", "uniform_flip", "--eta", "0.2", "--name", "o", "--out-dir", "."],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let oracle = srra::LabelOracle::load(&dir.path().join("o_labels.csv"), &dir.path().join("o_oracle.json")).unwrap();
    assert_eq!(oracle.pool().n(), 10);
    assert!(oracle.measured_noise() > 0.0);
    let bad = srra(&["oracle-gen", "--task", "generic"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn theta_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = srra(&["theta", "--task", "generic", "--n", "40"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["theta_uniform"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}
