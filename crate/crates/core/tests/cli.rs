use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadpcac"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "short.toml", "name = \"short\"\nduration = 1.0\n");
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", scenario.to_str().unwrap(), "--no-plots", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("short.csv").exists());
    assert!(!out.join("short_position.svg").exists());
}

#[test]
fn missing_file_is_a_config_error() {
    let status = bin().args(["run", "/nonexistent/scenario.toml"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "bad.toml", "duration = 1.0\nhorizn = 3\n");
    let status = bin().args(["run", scenario.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn fault_exits_one_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "fault.toml",
        "name = \"fault\"\nduration = 5.0\n[[events]]\ntime = 2.0\nmass_scale = 1e-300\n",
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", scenario.to_str().unwrap(), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let partial = quadpcac::sim::Trace::load_csv(&out.join("fault_partial.csv")).unwrap();
    assert!(!partial.is_empty());
}

#[test]
fn sweep_runs_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "base.toml", "name = \"base\"\nduration = 1.0\n");
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", scenario.to_str().unwrap(), "--param", "identification.theta0"])
        .args(["--values", "1e-3,1e3", "--no-plots", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("base_identification.theta0_1e-3.csv").exists());
    assert!(out.join("base_identification.theta0_1e3.csv").exists());
}

#[test]
fn sweep_with_bad_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "base.toml", "duration = 1.0\n");
    let status = bin()
        .args(["sweep", scenario.to_str().unwrap(), "--param", "controller.nope", "--values", "1"])
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let output = bin().arg("verify").output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stdout));
}
