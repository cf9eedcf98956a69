use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_unlabeled-detect"));
    cmd.env_remove("UNLABELED_DETECT_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn worked_model() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models/worked_example.json").display().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

#[test]
fn detect_reproduces_worked_example() {
    let model = worked_model();
    let v = json(&run(&["detect", "--model", &model, "--type", "2,1,2"]));
    assert_eq!(v["detector"], "detB");
    assert_eq!(v["path_h1"], serde_json::json!([3, 3, 2, 1, 1]));

    let v = json(&run(&["detect", "--model", &model, "--type", "2,1,2", "--detectors", "detA,ulr"]));
    assert_eq!(v[0]["path_h1"], serde_json::json!([3, 2, 3, 1, 1]));
    assert!(v[1]["path_h1"].is_null());
}

#[test]
fn detect_accepts_labeled_symbols() {
    let model = worked_model();
    let by_type = json(&run(&["detect", "--model", &model, "--type", "2,1,2", "--detectors", "hungarian"]));
    let by_symbols =
        json(&run(&["detect", "--model", &model, "--symbols", "3,1,3,2,1", "--detectors", "hungarian,labeled"]));
    assert_eq!(by_symbols[0]["statistic"], by_type["statistic"]);
    assert!(by_symbols[1]["statistic"].is_f64());
    // the labeled statistic needs the labeled vector
    assert_eq!(run(&["detect", "--model", &model, "--type", "2,1,2", "--detectors", "labeled"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(run(&["roc", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--experiment", "exp2", "--delta", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--experiment", "exp1", "--m", "1"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--experiment", "exp3", "--m", "3"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--runs", "10"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--experiment", "custom"]).status.code(), Some(2));
    assert_eq!(run(&["roc", "--detectors", "ulr,nope"]).status.code(), Some(2));
    let out = run(&["roc", "--experiment", "exp2", "--delta", "0"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
}

#[test]
fn help_lists_every_flag() {
    let out = run(&["roc", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--config", "--experiment", "--model", "--m", "--n", "--delta", "--runs", "--seed", "--detectors", "--out",
        "--threads", "--gnuplot",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

fn roc_files(dir: &Path, extra: &[&str]) -> Vec<(String, String)> {
    let out_dir = dir.display().to_string();
    let mut args = vec![
        "roc", "--experiment", "exp1", "--m", "3", "--n", "20", "--runs", "200", "--seed", "7", "--detectors",
        "ulr,detA,detB,auction", "--out", &out_dir,
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn roc_outputs_are_byte_identical_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let serial = roc_files(a.path(), &["--threads", "1"]);
    let parallel = roc_files(b.path(), &["--threads", "3"]);
    assert_eq!(serial.len(), 4);
    assert_eq!(serial, parallel);
    let header = &serial[0].1;
    for key in ["# seed: 7", "# runs: 200", "# n: 20", "# m: 3", "# config hash: "] {
        assert!(header.contains(key), "missing {key} in\n{header}");
    }
}

#[test]
fn flags_override_config_and_env_supplies_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "exp3", "n": 10, "runs": 300, "detectors": "ulr"}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .env("UNLABELED_DETECT_SEED", "42")
        .args(["roc", "--config", cfg.to_str().unwrap(), "--runs", "150", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("roc_exp3_m2_n10_ulr.csv")).unwrap();
    assert!(csv.contains("# runs: 150"));
    assert!(csv.contains("# seed: 42"));
    assert!(csv.contains("\"experiment\":\"exp3\""));

    fs::write(&cfg, r#"{"experiment": "exp3", "bogus": 1}"#).unwrap();
    assert_eq!(run(&["roc", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn exponent_curve_writes_overlay_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["exponent-curve", "--experiment", "exp3", "--points", "20", "--gnuplot", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("exponent_curve_exp3_m2.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "alpha,omega_unlabeled,omega_labeled,omega_iid_bound");
    assert_eq!(rows.len(), 21);
    assert!(dir.path().join("exponent_curve_exp3_m2.gp").exists());
}

#[test]
fn empirical_exponents_and_bench_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "empirical-exponents", "--experiment", "exp3", "--n-list", "20,40", "--runs", "500", "--detectors", "ulr",
        "--type1-target", "0.2", "--out", d,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("exponents_exp3_m2_ulr.csv")).unwrap();
    assert!(csv.contains("# threshold rule: H0 empirical quantile at type-I target 0.2"));

    let out = run(&["bench", "--experiment", "exp1", "--m", "3", "--n", "10", "--reps", "100", "--detectors", "detB", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("detB"));
    assert_eq!(run(&["bench", "--reps", "5", "--out", d]).status.code(), Some(2));
}
