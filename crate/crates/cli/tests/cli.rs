use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pell(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pell"));
    cmd.args(args).env_remove("PELL_OUT");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identity_has_p0_one() {
    let o = pell(&["check-matrix", "[[1,0],[0,1]]"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p0      = 1.000000"));
}

#[test]
fn complex_identity_p0() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["check-matrix", "[[[1,1],[0,0]],[[0,0],[1,1]]]"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let p0 = read_json(&dir.path().join("ellipticity.json"))["p0"].as_f64().unwrap();
    assert!((p0 - 2.0 / (1.0 + 0.5f64.sqrt())).abs() < 1e-5, "{p0}");
}

#[test]
fn malformed_matrix_exits_2() {
    assert_eq!(pell(&["check-matrix", "[[1,0],[0"], None).status.code(), Some(2));
}

#[test]
fn non_elliptic_matrix_fails() {
    assert_eq!(pell(&["check-matrix", "[[1,0],[0,-1]]"], None).status.code(), Some(1));
}

#[test]
fn unknown_id_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["verify", "no_such_check", "--config", "block"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"name\": \"x\"").unwrap();
    let o = pell(&["verify", "all", "--config", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_field_spec_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nofield.json");
    std::fs::write(&cfg, r#"{"name": "x", "domain": {"n": 2}}"#).unwrap();
    let o = pell(&["solve", "--config", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("field"));
}

#[test]
fn control_exits_0_with_fail_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["verify", "dissipativity_p8_control", "--config", "ac06-dissipativity"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("dissipativity_p8_control.json"));
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["expected_fail"], true);
}

#[test]
fn verify_all_on_block_writes_seven_reports() {
    let a = tempfile::tempdir().unwrap();
    let o = pell(&["verify", "all", "--config", "block"], Some(a.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let reports: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json") && n != "metadata.json")
        .collect();
    assert_eq!(reports.len(), 7, "{reports:?}");
    let summary = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 8);
    assert!(read_json(&a.path().join("metadata.json"))["started_unix"].is_number());

    // same config and seed give byte-identical reports
    let b = tempfile::tempdir().unwrap();
    assert_eq!(pell(&["verify", "all", "--config", "block", "--jobs", "1"], Some(b.path())).status.code(), Some(0));
    for name in &reports {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }

    let r = pell(&["report", a.path().to_str().unwrap()], None);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("good_lambda"));
}

#[test]
fn env_var_overrides_out() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pell"))
        .args(["solve", "--config", "laplace", "--mesh-levels", "1"])
        .arg("--out")
        .arg(flag_dir.path())
        .env("PELL_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.path().join("solve.json").exists());
    assert!(!flag_dir.path().join("solve.json").exists());
}

#[test]
fn solve_writes_grid_and_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["solve", "--config", "laplace", "--mesh-levels", "2"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("residual=")).count(), 2);
    let bytes = std::fs::read(dir.path().join("solution_l1_d0.bin")).unwrap();
    let grid = pell_core::solver::read_binary(&bytes).unwrap();
    assert!(!grid.values.is_empty());
}

#[test]
fn graph_solve_persists_pullback() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["solve", "--config", "graph", "--mesh-levels", "1"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let meta = read_json(&dir.path().join("pullback_l0.json"));
    assert!(meta["min_d0rho0"].as_f64().unwrap() > 0.0);
    assert!(meta["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn carleson_reports_both_norms() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["carleson", "--config", "block", "--mesh-levels", "1"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let c = read_json(&dir.path().join("carleson.json"));
    let level = &c["levels"][0];
    assert!(level["mu"]["norm"].as_f64().unwrap() > 0.0);
    // block coefficients do not depend on x0 and have a constant first row
    assert_eq!(level["mu_prime"]["norm"].as_f64().unwrap(), 0.0);
}

#[test]
fn mesh_levels_and_seed_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = pell(&["verify", "fubini", "--config", "ac05-fubini", "--mesh-levels", "3", "--seed", "99"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let meta = read_json(&dir.path().join("metadata.json"));
    assert_eq!(meta["seed"], 99);
    let r = read_json(&dir.path().join("fubini.json"));
    assert_eq!(r["trend"].as_array().unwrap().len(), 3);
}
