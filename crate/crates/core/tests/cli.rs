use std::path::Path;
use std::process::{Command, Output};

use twistlab::cli::ExperimentConfig;

fn twistlab(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twistlab"));
    cmd.args(args).env_remove("TWISTLAB_OUT");
    if let Some(p) = out_env {
        cmd.env("TWISTLAB_OUT", p);
    }
    cmd.output().expect("binary runs")
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("manifest-{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn katok_reports_the_closed_form_twist_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = twistlab(&["katok", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let m = manifest(dir.path(), "katok");
    assert_eq!(m["passed"], true);
    assert_eq!(m["config_sha256"], ExperimentConfig::default().hash());
    let twist = &m["checks"][0];
    assert_eq!(twist["id"], "katok-twist");
    let k1 = twist["metrics"][0][1].as_f64().unwrap();
    let k2 = twist["metrics"][1][1].as_f64().unwrap();
    assert!((k1 - 1.0 / 11.0).abs() < 1e-10 && (k2 + 1.0 / 9.0).abs() < 1e-10);
    assert!(dir.path().join("katok-twist.csv").exists() && dir.path().join("katok-scan.csv").exists());
}

#[test]
fn csv_outputs_are_bit_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = twistlab(&["extend", "--out", d.path().to_str().unwrap(), "--jobs", "2"], None);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("extend.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    // no temporary files are left behind
    let names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn environment_overrides_the_out_flag() {
    let (flag, env) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let out = twistlab(&["degenerate", "--out", flag.path().to_str().unwrap()], Some(env.path()));
    assert_eq!(out.status.code(), Some(0));
    assert!(env.path().join("degenerate.csv").exists());
    assert!(!flag.path().join("degenerate.csv").exists());
}

#[test]
fn failing_checks_give_a_nonzero_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"chords": {"seeds": 0}}"#).unwrap();
    let out = twistlab(&["chords", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(manifest(dir.path(), "chords")["passed"], false);
}

#[test]
fn config_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"seed\": 3,\n  \"katok\": {\"eps\": 0.1}\n}\n").unwrap();
    let out = twistlab(&["katok", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn tol_flag_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = twistlab(&["degenerate", "--tol", "-1", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}
