use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn treegibbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treegibbs")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("model.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn thresholds_csv_is_the_default() {
    let out = treegibbs(&["thresholds", "--d", "2,6", "--n", "1,10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "model,d,n,threshold\nsos,2,1,1.953\nsos,2,10,3.396\nsos,6,1,0.810\nsos,6,10,2.719\n");
}

#[test]
fn thresholds_json_has_schema() {
    let out = treegibbs(&["thresholds", "--model", "log", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["model"], "log");
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn out_dir_gets_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let r = treegibbs(&["thresholds", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert!(r.stdout.is_empty());
    for f in ["thresholds.csv", "thresholds.json", "thresholds.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let txt = std::fs::read_to_string(out.join("thresholds.txt")).unwrap();
    assert!(txt.lines().nth(1).unwrap().contains("1.953"));
}

#[test]
fn solve_reports_certificate_and_measure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "localization = [0, 5]\n[space]\nkind = \"window\"\nradius = 30\n");
    let out = treegibbs(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["measure"]["pi"].as_array().unwrap().len(), 61);
    assert_eq!(v["measure"]["transition"].as_array().unwrap().len(), 61 * 61);
    assert!(v["solution"]["certificate"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn failed_bound_exits_with_one() {
    // A single tree of a lazy measure stays in one state of A, so the
    // sampled minimum over A is zero.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sampling]\ntrees = 1\ndepth = 2\n");
    let out = treegibbs(&["sample", "--config", &cfg, "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn errors_exit_with_two_and_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("dd = 2\n", "ConfigError"),
        ("localization = [0]\n[potential]\nkind = \"sos\"\nbeta = 0.5\n", "ThresholdExceeded"),
        ("localization = [100]\n", "NotASubset"),
    ];
    for (text, code) in cases {
        let cfg = write_config(dir.path(), text);
        let out = treegibbs(&["solve", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(out.stdout.is_empty());
        let v: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(v["error"], code, "{text}: {v}");
        assert_eq!(v["schema"], 1);
    }
    let out = treegibbs(&["solve", "--config", "/nonexistent/model.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "IoError");
}

#[test]
fn seed_changes_samples_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sampling]\ntrees = 50\n");
    let a = treegibbs(&["sample", "--config", &cfg, "--seed", "1"]);
    let b = treegibbs(&["sample", "--config", &cfg, "--seed", "1"]);
    let c = treegibbs(&["sample", "--config", &cfg, "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "tree,vertex,depth,state");
    assert_eq!(text.lines().count(), 1 + 50 * 22);
}
