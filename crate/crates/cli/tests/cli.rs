//! End-to-end runs of the binary: exit codes, artifact reuse, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landscape-lab"))
}

fn write_cfg(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// 1d box (0, pi), no potential, unit scale: the analytic reference setup.
fn interval_cfg(n: usize) -> Value {
    json!({
        "grid": { "lower": [0.0], "upper": [std::f64::consts::PI], "n": [n] },
        "laplacian_scale": 1.0
    })
}

fn small_2d_cfg() -> Value {
    json!({
        "grid": { "lower": [0.0, 0.0], "upper": [1.0, 1.0], "n": [17, 17] },
        "potential": { "bumps_per_axis": 3, "weight_high": 25.0, "sigma": 0.2, "offset": 2.0, "seed": 9 },
        "laplacian_scale": 0.5
    })
}

#[test]
fn gen_model_is_deterministic_across_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &small_2d_cfg());
    let (out_a, out_b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&out_a, &out_b] {
        let r = run(&["gen-model", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", stderr_of(&r));
    }
    let va = std::fs::read(out_a.join("V.llf1")).unwrap();
    let vb = std::fs::read(out_b.join("V.llf1")).unwrap();
    assert_eq!(va, vb);
    assert!(out_a.join("manifest.json").exists());
}

#[test]
fn zero_strength_magnetic_field_writes_zero_components() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg_val = small_2d_cfg();
    cfg_val["magnetic"] =
        json!({ "bumps_per_axis": 2, "b": 0.0, "sigma_x": 0.3, "sigma_y": 0.25, "seed": 4 });
    let cfg = write_cfg(tmp.path(), &cfg_val);
    let out = tmp.path().join("out");
    let r = run(&["gen-model", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr_of(&r));
    for name in ["A_x.llf1", "A_y.llf1"] {
        let a = landscape_core::io::read_scalar(&out.join(name)).unwrap();
        assert!(a.values().iter().all(|&x| x == 0.0), "{name} not identically zero");
    }
}

#[test]
fn eigs_on_the_empty_interval_finds_the_unit_ground_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 65;
    let cfg = write_cfg(tmp.path(), &interval_cfg(n));
    let out = tmp.path().join("out");
    let r = run(&["eigs", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr_of(&r));
    let index: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eigs.json")).unwrap()).unwrap();
    let lambda = index[0]["lambda"].as_f64().unwrap();
    let h = std::f64::consts::PI / (n - 1) as f64;
    assert!((lambda - 1.0).abs() < 5.0 * h * h, "lambda = {lambda}");
    assert!(index[0]["converged"].as_bool().unwrap());
    assert!(out.join("eig_000.llf1").exists());
}

#[test]
fn verify_example_passes_on_the_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &interval_cfg(129));
    let out = tmp.path().join("out");
    let r = run(&["verify", "example-1d", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr_of(&r));
    assert!(out.join("verify_example_1d.csv").exists());
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["verifications"][0]["pass"], Value::Bool(true));
}

#[test]
fn verify_example_rejects_a_wrong_box() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        &json!({
            "grid": { "lower": [0.0], "upper": [1.0], "n": [65] },
            "laplacian_scale": 1.0
        }),
    );
    let r = run(&["verify", "example-1d", "--config", cfg.to_str().unwrap(), "--out",
        tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", stderr_of(&r));
    assert!(stderr_of(&r).contains("(0, pi)"), "{}", stderr_of(&r));
}

#[test]
fn corollary_without_small_times_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg_val = small_2d_cfg();
    cfg_val["paths"] = json!({
        "n_paths": 100, "dt": 1e-4,
        "t_grid": [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0],
        "seed": 3
    });
    let cfg = write_cfg(tmp.path(), &cfg_val);
    let r = run(&["verify", "corollary", "--config", cfg.to_str().unwrap(), "--out",
        tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", stderr_of(&r));
    let msg = stderr_of(&r);
    assert!(msg.contains("covering [1e-5, 1e-3]"), "{msg}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg_val = small_2d_cfg();
    cfg_val["grdi"] = json!({});
    let cfg = write_cfg(tmp.path(), &cfg_val);
    let r = run(&["gen-model", "--config", cfg.to_str().unwrap(), "--out",
        tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", stderr_of(&r));
    assert!(stderr_of(&r).contains("grdi"), "{}", stderr_of(&r));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let r = run(&["gen-model", "--config", "/nonexistent/run.json"]);
    assert_eq!(r.status.code(), Some(2), "{}", stderr_of(&r));
}

#[test]
fn a_corrupted_artifact_is_reported_as_stale() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), &small_2d_cfg());
    let out = tmp.path().join("out");
    let r = run(&["gen-model", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr_of(&r));
    // Flip one payload byte; the checksum in the manifest no longer matches.
    let v_path = out.join("V.llf1");
    let mut bytes = std::fs::read(&v_path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    std::fs::write(&v_path, &bytes).unwrap();
    let r = run(&["landscape", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "{}", stderr_of(&r));
    assert!(stderr_of(&r).contains("stale checksum"), "{}", stderr_of(&r));
}

#[test]
fn fk_bound_reuses_artifacts_and_rewrites_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg_val = small_2d_cfg();
    cfg_val["paths"] =
        json!({ "n_paths": 200, "dt": 1e-3, "t_grid": [1e-2, 2e-2], "seed": 5 });
    cfg_val["sample"] = json!({ "points": [[0.5, 0.5], [0.3, 0.6]] });
    cfg_val["bound_lambda"] = json!(12.0);
    let cfg = write_cfg(tmp.path(), &cfg_val);
    let out = tmp.path().join("out");
    let args = ["fk-bound", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let r = run(&args);
    assert!(r.status.success(), "{}", stderr_of(&r));
    let curve = std::fs::read_to_string(out.join("fk_bound.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next().unwrap(), "x0_0,x0_1,t,mean,stderr,n_alive,n_paths,lambda");
    assert_eq!(lines.count(), 4); // 2 points x 2 times
    let envelope = std::fs::read_to_string(out.join("fk_bound_envelope.csv")).unwrap();
    assert_eq!(envelope.lines().count(), 3);

    let r = run(&args);
    assert!(r.status.success(), "{}", stderr_of(&r));
    assert_eq!(curve, std::fs::read_to_string(out.join("fk_bound.csv")).unwrap());
}
