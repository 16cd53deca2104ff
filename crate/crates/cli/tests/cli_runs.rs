use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-bubbling")).arg("--no-cache").args(args).output().unwrap()
}

fn record(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn square_census_has_three_half_periods() {
    let v = record(&run(&["census", "--basis", path(&data("square.json")), "--grid", "64"]));
    assert_eq!(v["command"], "census");
    assert_eq!(v["outputs"]["count"], 3);
    assert_eq!(v["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn rhombic_census_has_five_points() {
    let v = record(&run(&["census", "--basis", path(&data("rhombic.json"))]));
    assert_eq!(v["outputs"]["count"], 5);
}

#[test]
fn half_period_pair_fails_verification() {
    let v = record(&run(&["verify", "--config", path(&data("halfperiod_pair.json"))]));
    let o = &v["outputs"];
    assert_eq!(o["verdict"], "fail");
    assert_eq!(o["cond3_sign"], "positive");
    assert!(o["cond2_residual"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1e-8));
    assert!(o["d2"]["value"].as_f64().unwrap() > 0.0);
    assert!(o["d2"]["error"].as_f64().unwrap() >= 0.0);
}

#[test]
fn misspelled_key_is_a_config_error() {
    let out = run(&["verify", "--config", path(&data("malformed.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("blowup.partiton"), "{err}");
}

#[test]
fn unreadable_input_is_a_config_error() {
    let out = run(&["census", "--basis", "/nonexistent/basis.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/basis.json"));
}

#[test]
fn empty_sweep_writes_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"moduli": {"points": []}}"#).unwrap();
    let out = run(&["sweep", "--spec", path(&spec)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("tau_re,tau_im,count"));
}

#[test]
fn out_directory_receives_record_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("path.json");
    std::fs::write(&spec, r#"{"start": [0.0, 1.0], "end": [0.5, 0.85], "samples": 2}"#).unwrap();
    let out_dir = dir.path().join("out");
    let v = record(&run(&["--out", path(&out_dir), "census", "sweep", "--tau-path", path(&spec), "--grid", "64"]));
    assert_eq!(v["outputs"]["rows"], 2);
    let csv = std::fs::read_to_string(out_dir.join("census_sweep.csv")).unwrap();
    let counts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(counts, ["3", "5"]);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("census_sweep.json")).unwrap()).unwrap();
    assert_eq!(saved["input_digest"], v["input_digest"]);
}

#[test]
fn theta_and_ewald_values_agree() {
    let eval = |backend: &str| {
        let v = record(&run(&["green", "eval", "--basis", path(&data("rhombic.json")), "--point", "0.3,-0.2", "--backend", backend]));
        v["outputs"]["value"].as_f64().unwrap()
    };
    assert!((eval("theta") - eval("ewald")).abs() < 1e-10);
}

#[test]
fn exterior_monte_carlo_brackets_the_closed_form() {
    let v = record(&run(&["--seed", "3", "dfunc", "--basis", path(&data("square.json")), "--point", "0.5,0.5", "--mc-samples", "200000"]));
    let o = &v["outputs"];
    assert!(o["value"].as_f64().unwrap().is_finite() && o["error"].as_f64().unwrap() > 0.0);
    let check = &o["exterior_check"];
    let gap = (check["closed_form"].as_f64().unwrap() - check["monte_carlo"].as_f64().unwrap()).abs();
    assert!(gap < 3.0 * check["standard_error"].as_f64().unwrap(), "{check}");
}

#[test]
fn cache_is_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let basis = data("square.json");
    let args = ["--cache", path(&cache), "green", "eval", "--basis", path(&basis), "--point", "0.25,0.25"];
    let first = Command::new(env!("CARGO_BIN_EXE_torus-bubbling")).args(args).output().unwrap();
    assert!(cache.join("constants.json").exists());
    let second = Command::new(env!("CARGO_BIN_EXE_torus-bubbling")).args(args).output().unwrap();
    assert_eq!(record(&first)["outputs"], record(&second)["outputs"]);
}

#[test]
fn equal_mass_solution_has_equal_masses() {
    let v = record(&run(&["liouville", "equal-mass", "--c1", "2", "--c2", "1", "--a1", "-0.5"]));
    let o = &v["outputs"];
    let (m1, m2) = (o["M1"].as_f64().unwrap(), o["M2"].as_f64().unwrap());
    assert!((m1 - m2).abs() < 1e-6 * m1, "{o}");
    assert!((m1 - 8.0 * std::f64::consts::PI).abs() < 1e-6, "{o}");
}
