use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .output()
        .expect("lab runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const BARRIER: &str = r#"{
  "geometry": { "pockets": [{ "center": [0.5, 0.5], "radius": 0.15 }] },
  "amplitudes": [0.1],
  "eps": [1e-3],
  "delta": [0.02],
  "samples": 50
}"#;

const REDISTRIBUTION: &str = r#"{
  "geometry": { "pockets": [{ "center": [0.5, 0.5], "radius": 0.15 }] },
  "amplitudes": [0.1],
  "eps": [1e-2],
  "delta": [0.02],
  "paths": 100,
  "starts": [{ "point": [0.65, 0.5] }, { "point": [0.35, 0.5] }],
  "sde": { "dt0": 1e-5, "eta_drift": 0.02, "eta_diff": 0.02 }
}"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn single_run_dir(root: &Path, experiment: &str) -> PathBuf {
    let runs: Vec<_> = fs::read_dir(root.join(experiment))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(runs.len(), 1);
    runs[0].clone()
}

#[test]
fn unknown_experiment_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BARRIER);
    let o = lab(&["bogus", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown experiment `bogus`"));
}

#[test]
fn missing_config_flag_is_usage_error() {
    assert_eq!(lab(&["barrier-check"]).status.code(), Some(2));
}

#[test]
fn unreadable_config_exits_2() {
    let o = lab(&["barrier-check", "--config", "/nonexistent/c.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = BARRIER.replace("\"samples\": 50", "\"samples\": 50, \"colour\": 3");
    let cfg = write(dir.path(), "c.json", &text);
    let o = lab(&["barrier-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn violations_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = BARRIER
        .replace(r#"[{ "center": [0.5, 0.5], "radius": 0.15 }]"#,
            r#"[{ "center": [0.5, 0.5], "radius": 0.15 }, { "center": [0.7, 0.5], "radius": 0.1 }]"#)
        .replace("[0.1]", "[0.1, 0.1]");
    let cfg = write(dir.path(), "c.json", &text);
    let o = lab(&["barrier-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("pockets 0,1 closures intersect"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn passing_run_writes_report_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BARRIER);
    let out = dir.path().join("out");
    let o = lab(&[
        "barrier-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o)
        .lines()
        .any(|l| l.starts_with("PASS max_operator")));
    let run = single_run_dir(&out, "barrier-check");
    for f in ["paths.csv", "summary.csv", "report.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "barrier-check");
    assert!(report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v["threshold"].is_number()));
    assert_eq!(report["config"]["samples"], 50);
}

#[test]
fn failing_verdict_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", REDISTRIBUTION);
    let out = dir.path().join("out");
    let o = lab(&[
        "redistribution",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL ")));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", REDISTRIBUTION);
    let out = dir.path().join("out");
    let o = lab(&[
        "redistribution",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "41",
        "--paths",
        "150",
        "--workers",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let run = single_run_dir(&out, "redistribution");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 41);
    assert_eq!(report["config"]["paths"], 150);
    assert_eq!(report["config"]["workers"], 2);
    let rows = fs::read_to_string(run.join("paths.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 2 * 150);
}

#[test]
fn too_few_paths_from_flag_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", REDISTRIBUTION);
    let o = lab(&[
        "redistribution",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", REDISTRIBUTION);
    let mut bytes = Vec::new();
    for (i, w) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        lab(&[
            "redistribution",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            w,
        ]);
        let run = single_run_dir(&out, "redistribution");
        bytes.push(fs::read(run.join("paths.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}
