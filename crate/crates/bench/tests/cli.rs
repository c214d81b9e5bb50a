//! End-to-end runs of the command-line front end.

use sinkhorn_dro_bench::cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["sinkhorn-dro"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn verify_on_bundled_example_passes() {
    let (code, out, err) = call(&["verify"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.lines().count() >= 4);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn missing_config_is_reported_with_its_path() {
    let (code, _, err) = call(&["solve", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/exp.toml"), "{err}");
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "app = \"newsvendor\"\nunknown_key = 3\n").unwrap();
    let (code, _, err) = call(&["benchmark", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("bad.toml"), "{err}");
}

#[test]
fn unknown_subcommand_prints_usage() {
    let (code, _, err) = call(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("benchmark"));
}

#[test]
fn sinkhorn_dist_and_export_on_bundled_config() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/example1.toml");
    let (code, out, err) = call(&["sinkhorn-dist", "--config", cfg]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["value"].as_f64().unwrap().is_finite());
    assert!(v["marginal_violation"].as_f64().unwrap() <= 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.cbf");
    let (code, _, err) = call(&["export-cbf", "--config", cfg, "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let inst = sinkhorn_dro_bench::io::read_cbf(&path).unwrap();
    assert_eq!(inst.n, 2);
    assert_eq!(inst.f, vec![0.0, 1.0, 2.5]);
}

#[test]
fn solve_finite_reports_regime() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/example1.toml");
    let (code, out, err) = call(&["solve", "--config", cfg]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["regime"], "Interior");
    assert!(v["lambda"].as_f64().unwrap() > 0.0);
}
