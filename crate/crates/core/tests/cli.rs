use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chain-taylor"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
    "ring": {"N": [8, 16], "L": 1.0, "J_max": 12, "scale": "auto"},
    "force": {"L": 1.0, "a0": 0.0, "harmonics": [{"k": 1, "a": 0.0, "b": 0.5}]},
    "ode": {"rel_tol": 1e-11, "abs_tol": 1e-13, "sample_count": 4}
}"#;

#[test]
fn coeffs_writes_one_table_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run(
        &["coeffs", "--config", &config, "--format", "both"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for n in [8, 16] {
        let csv = fs::read_to_string(dir.path().join(format!("coeffs_N{n}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i,j,c_scaled,scale,N,L,J_max"));
        assert_eq!(lines.count(), n * 12);
        let table = json(&dir.path().join(format!("coeffs_N{n}.json")));
        assert_eq!(table["config"]["N"], n);
        assert_eq!(table["coefficients"].as_array().unwrap().len(), n);
    }
}

#[test]
fn constant_force_table_has_only_first_order() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"ring": {"N": 6, "J_max": 5}, "force": {"L": 1.0, "a0": 0.3}}"#,
    );
    let out = run(
        &["coeffs", "--config", &config, "--format", "csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("coeffs_N6.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let value: f64 = fields[2].parse().unwrap();
        if fields[1] == "1" {
            assert!(value > 0.0);
        } else {
            assert_eq!(value, 0.0, "{line}");
        }
    }
}

#[test]
fn malformed_config_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"ring": {"N": 8, "J_max": -3}, "force": {"L": 1}}"#,
            "ring.J_max",
        ),
        (
            r#"{"ring": {"N": [8, 8], "J_max": 4}, "force": {"L": 1}}"#,
            "ring.N",
        ),
        (
            r#"{"ring": {"N": 8, "J_max": 4}, "force": {"L": 1, "harmonics": [{"k": 0, "a": 1, "b": 0}]}}"#,
            "force.harmonics[0].k",
        ),
        (
            r#"{"ring": {"N": 8, "J_max": 4}, "force": {"L": 1}, "ode": {"rtol": 1}}"#,
            "rtol",
        ),
        ("not json", "config"),
    ];
    for (text, field) in cases {
        let config = write_config(dir.path(), text);
        let out = run(&["coeffs", "--config", &config], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = stderr(&out);
        assert!(err.contains(field), "{field}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"ring": {"N": 8, "J_max": 4, "scale": 1.0}, "force": {"L": 1.0, "harmonics": [{"k": 1, "a": 0, "b": 1e200}]}}"#,
    );
    let out = run(&["coeffs", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("overflow"));
}

#[test]
fn compare_reports_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run(
        &["compare", "--config", &config, "--format", "json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("compare_N8.json"));
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["samples"].as_array().unwrap().len(), 4);
    let t_end = report["t_end"].as_f64().unwrap();
    let r_hat = report["radius"]["r_hat"].as_f64().unwrap();
    assert!((t_end - 0.2 * r_hat).abs() <= 1e-12 * r_hat);
}

#[test]
fn compare_rejects_long_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"ring": {"N": 8, "J_max": 16}, "force": {"L": 1.0, "harmonics": [{"k": 1, "a": 0, "b": 0.5}]}, "ode": {"t_end": 5.0}}"#,
    );
    let out = run(&["compare", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ode.t_end"));
}

#[test]
fn compare_constant_and_zero_force() {
    for (a0, tol) in [(0.4, 1e-12), (0.0, 0.0)] {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{"ring": {{"N": 5, "J_max": 10}}, "force": {{"L": 1.0, "a0": {a0}}}, "ode": {{"t_end": 0.5}}}}"#
        );
        let config = write_config(dir.path(), &text);
        let out = run(
            &["compare", "--config", &config, "--format", "json"],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let report = json(&dir.path().join("compare_N5.json"));
        assert!(
            report["max_rel_error"].as_f64().unwrap() <= tol,
            "a0 = {a0}"
        );
        assert_eq!(report["radius"]["degenerate"], true);
    }
}

#[test]
fn radius_of_constant_force_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"ring": {"N": [4, 8, 16, 32], "J_max": 12}, "force": {"L": 2.0, "a0": 1.0}}"#,
    );
    let out = run(&["radius", "--config", &config], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("radius.json"));
    for e in report["radius"]["estimates"].as_array().unwrap() {
        assert_eq!(e["degenerate"], true);
    }
    assert!(report["radius"]["trend"].is_null());
}

#[test]
fn simulate_writes_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run(
        &["simulate", "--config", &config, "--threads", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("trajectory_N16.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,i,x,v"));
    // initial state plus four samples
    assert_eq!(csv.lines().count(), 1 + 5 * 16);
    let summary = json(&dir.path().join("trajectory_N16.json"));
    assert_eq!(summary["summary"]["samples"], 5);
}

#[test]
fn verify_and_sweep_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let verify = json(&dir.path().join("verify.json"));
    assert_eq!(verify["verify"]["pass"], true);
    assert_eq!(verify["verify"]["checks"].as_array().unwrap().len(), 5);

    let out = run(&["sweep", "--format", "json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = json(&dir.path().join("sweep.json"));
    assert_eq!(sweep["sweep"]["exponents"].as_array().unwrap().len(), 32);
    assert_eq!(sweep["sweep"]["radius"]["trend"]["non_increasing"], true);
    assert_eq!(sweep["sweep"]["majorant"]["holds"], true);
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = write_config(
        a.path(),
        r#"{"ring": {"N": [8, 16, 32, 64], "J_max": 16}, "force": {"L": 1.0, "harmonics": [{"k": 2, "a": 0.3, "b": 0.1}]}}"#,
    );
    for dir in [a.path(), b.path()] {
        let out = run(&["sweep", "--config", &config], dir);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["sweep.json", "sweep_exponents.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
