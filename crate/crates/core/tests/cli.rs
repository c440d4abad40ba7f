use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surfwalk"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn appendix_on_the_even_form_passes() {
    let out = bin().args(["lattice-verify", "--gram", "14,0;0,-28", "--bound", "50", "--check", "appendix"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["pass"] == true));
}

#[test]
fn evenness_failure_sets_exit_one() {
    let out = bin().args(["lattice-verify", "--gram", "7,0;0,-14", "--check", "even", "--check", "-2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let lines = json_lines(&out);
    assert_eq!(lines[0]["check"], "even");
    assert_eq!(lines[0]["pass"], false);
    assert_eq!(lines[1]["pass"], true);
}

#[test]
fn malformed_gram_is_a_config_error() {
    let out = bin().args(["lattice-verify", "--gram", "7,x;0,-14", "--check", "even"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_report_writes_only_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["report", "--config"]).arg(config("empty.toml")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages"].as_array().unwrap().len(), 0);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn unknown_config_field_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\nseed = 1\nstages = []\nbogus = 3\n[model]\nkind = \"torus\"\ngenerators = []\n").unwrap();
    let out = bin().args(["report", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jets_test_passes() {
    let out = bin().args(["jets-test", "--seed", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(json_lines(&out).iter().all(|l| l["pass"] == true));
}

#[test]
fn torus_lyapunov_matches_the_oracle() {
    let out = bin().args(["lyapunov", "--config"]).arg(config("torus_golden.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.96242365"), "{text}");
}
