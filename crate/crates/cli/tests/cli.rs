use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_eit-mono");

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const BALL: &str = r#"{
  "mesh": {"generate": {"domain": {"disk": {"radius": 1.0}}, "h": 0.1}},
  "phantom": [{"mask": {"shape": {"ball": {"center": [0.1, 0.0], "radius": 0.3}}}, "value": [2,0,0,0,0,0,2,0]}],
  "method": "corollary",
  "dictionary": {"halfspace_caps": {"n_dirs": 6, "n_offsets": 6, "margin": null}},
  "test_inclusion": {"shape": {"ball": {"center": [0.1, 0.0], "radius": 0.45}}},
  "currents": [{"cos": 1}, "random"],
  "verify": {"pairs": 2, "currents": 2, "remainder_pairs": 1, "n_quad": 4}
}"#;

#[test]
fn ndmap_spectrum_matches_disk_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"mesh": {"generate": {"domain": {"disk": {"radius": 1.0}}, "h": 0.05}}}"#);
    let out = dir.path().join("run");
    let o = run(&["ndmap", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let values: Vec<f64> = csv.lines().skip(1).take(8).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (k, v) in values.iter().enumerate() {
        let n = (k / 2 + 1) as f64;
        assert!((v * n - 1.0).abs() < 0.02, "mode {}: {v}", k + 1);
    }
}

#[test]
fn corollary_reconstruction_covers_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL);
    let out = dir.path().join("run");
    let o = run(&["reconstruct", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&out.join("recon.json"));
    assert_eq!(rec["d_covered"], Value::Bool(true));
    assert_eq!(rec["empty_pass_set"], Value::Bool(false));
    assert!(rec["mask_area"].as_f64().unwrap() < 0.5 * std::f64::consts::PI);
    let pgm = std::fs::read_to_string(out.join("mask.pgm")).unwrap();
    assert!(pgm.starts_with("P2"));
    let plot = std::fs::read_to_string(out.join("min_eig_vs_offset.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + rec["n_candidates"].as_u64().unwrap() as usize);
}

#[test]
fn complex_background_with_corollary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"background": {"value": [1,0.2,0,0,0,0,1,0.2]}, "method": "corollary",
            "mesh": {"generate": {"domain": {"disk": {"radius": 1.0}}, "h": 0.2}},
            "phantom": [{"mask": {"shape": {"ball": {"center": [0,0], "radius": 0.3}}}, "value": [2,0,0,0,0,0,2,0]}]}"#,
    );
    let out = dir.path().join("run");
    let o = run(&["reconstruct", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("self-adjoint background required") && err.contains("mono"), "{err}");
    assert!(!out.join("recon.json").exists());
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["mesh", "-c", missing.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "g.json", r#"{"gamma": {"box": {"min": [5,5], "max": [6,6]}}}"#);
    let o = run(&["mesh", "-c", cfg.to_str().unwrap(), "-o", dir.path().join("g").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "u.json", r#"{"no_such_field": 1}"#);
    assert_eq!(run(&["mesh", "-c", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "t.json", r#"{"mesh": {"generate": {"domain": {"disk": {"radius": 1.0}}, "h": 0.2}}}"#);
    let o = run(&["test", "-c", cfg.to_str().unwrap(), "-o", dir.path().join("t").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "test without a test inclusion");
    let cfg = write_config(
        dir.path(),
        "m.json",
        r#"{"mesh": {"generate": {"domain": {"disk": {"radius": 1.0}}, "h": 0.2}},
            "phantom": [{"mask": {"csv": "missing_mask.csv"}, "value": [2,0,0,0,0,0,2,0]}]}"#,
    );
    assert_eq!(run(&["phantom", "-c", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn manifest_hashes_match_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL);
    let out = dir.path().join("run");
    let o = run(&["phantom", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "phantom");
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.len() >= 8);
    for a in artifacts {
        let bytes = std::fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(a["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
}

#[test]
fn mesh_written_by_the_cli_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"mesh": {"generate": {"domain": {"rectangle": {"min": [0,0], "max": [2,1]}}, "h": 0.2}}}"#);
    let first = dir.path().join("a");
    assert!(run(&["mesh", "-c", cfg.to_str().unwrap(), "-o", first.to_str().unwrap()]).status.success());
    let cfg2 = write_config(dir.path(), "d.json", r#"{"mesh": {"file": "a/mesh.json"}}"#);
    let second = dir.path().join("b");
    let o = run(&["mesh", "-c", cfg2.to_str().unwrap(), "-o", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["mesh.json", "gamma.csv", "mesh_summary.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    let s = json(&second.join("mesh_summary.json"));
    assert!((s["area"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((s["gamma_length"].as_f64().unwrap() - 6.0).abs() < 1e-12);
}

fn assert_same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b).unwrap().map(|e| e.unwrap().file_name()).collect();
    other.sort();
    assert_eq!(names, other);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL);
    for cmd in ["reconstruct", "verify", "forward", "locpot"] {
        let runs: Vec<PathBuf> = ["1", "4"]
            .iter()
            .map(|j| {
                let out = dir.path().join(format!("{cmd}_{j}"));
                let o = run(&[cmd, "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--jobs", j]);
                assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
                out
            })
            .collect();
        assert_same_tree(&runs[0], &runs[1]);
    }
}

#[test]
fn seed_override_changes_random_outputs_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["forward", "-c", cfg.to_str().unwrap(), "-o", a.to_str().unwrap()]).status.success());
    assert!(run(&["forward", "-c", cfg.to_str().unwrap(), "-o", b.to_str().unwrap(), "--seed", "7"]).status.success());
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a.join("current_0.csv")), read(&b.join("current_0.csv")));
    assert_ne!(read(&a.join("current_1.csv")), read(&b.join("current_1.csv")));
}

#[test]
fn calibrated_tolerance_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL);
    let out = dir.path().join("run");
    let o = run(&[
        "test", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--method", "linearized", "--calibrate", "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out.join("test_report.json"));
    let cal = &rep["calibration"];
    assert!(cal["tol"].as_f64().unwrap() >= 10.0 * cal["noise"].as_f64().unwrap());
    assert_eq!(rep["report"]["pass"], Value::Bool(true));
    assert_eq!(rep["d_subset_of_c"], Value::Bool(true));
}
