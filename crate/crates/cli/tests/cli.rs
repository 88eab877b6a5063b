use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn hyperbary(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperbary"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn identity_map_extends_to_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &format!(
            r#"{{"command": "extend", "p": "inf", "inputs": {{"map": {:?}, "points": {:?}}}}}"#,
            data("maps/identity.json"),
            data("points.json")
        ),
    );
    let out = tmp.path().join("out");
    let res = hyperbary(&["--config", config.to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&out.join("extend.csv"));
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(r.last().unwrap().abs() < 1e-6, "moved by {}", r.last().unwrap());
    }
}

#[test]
fn lorentz_map_extends_isometrically() {
    let tmp = tempfile::tempdir().unwrap();
    let res = hyperbary(&["--config", data("configs/extend.json").to_str().unwrap()], tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&tmp.path().join("extend.csv"));
    // pairwise distances survive the extension of a boost-rotation
    let y: Vec<&[f64]> = rows.iter().map(|r| &r[4..7]).collect();
    let x: Vec<&[f64]> = rows.iter().map(|r| &r[1..4]).collect();
    let d = |a: &[f64], b: &[f64]| (a[0] * b[0] - a[1] * b[1] - a[2] * b[2]).max(1.0).acosh();
    for i in 0..rows.len() {
        for j in 0..i {
            assert!((d(x[i], x[j]) - d(y[i], y[j])).abs() < 1e-6);
        }
    }
}

#[test]
fn symmetric_measure_sits_at_the_origin_for_every_p() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &format!(
            r#"{{"command": "converge-p", "inputs": {{"measure": {:?}}}}}"#,
            data("symmetric_tangent.json")
        ),
    );
    let res = hyperbary(&["--config", config.to_str().unwrap()], tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = csv_rows(&tmp.path().join("converge_p.csv"));
    // 2^1 .. 2^14 followed by the p = inf row
    assert_eq!(rows.len(), 15);
    assert!(rows[14][0].is_infinite());
    for r in rows {
        // p, coords, distance to the circumcenter
        assert!((r[1] - 1.0).abs() < 1e-12 && r[2].abs() < 1e-12 && r[3].abs() < 1e-12);
        assert!(r[4] < 1e-12);
    }
}

#[test]
fn malformed_config_reports_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "{\n  \"command\": \"verify\",\n  \"seed\": 12,,\n}\n");
    let res = hyperbary(&["--config", config.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("column"), "{err}");
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"command": "verify", "sead": 1}"#);
    let res = hyperbary(&["--config", config.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn perturbed_map_fails_the_gate() {
    let tmp = tempfile::tempdir().unwrap();
    let res = hyperbary(
        &["--config", data("configs/audit_perturbed.json").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(res.status.code(), Some(1));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("audit_moebius_gate.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(false));
}

#[test]
fn verify_passes_and_hashes_its_config() {
    let tmp = tempfile::tempdir().unwrap();
    let res = hyperbary(&["verify"], tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["pass"] == Value::Bool(true)));
}

#[test]
fn barycenter_of_bundled_triangle() {
    let tmp = tempfile::tempdir().unwrap();
    let res = hyperbary(
        &["--config", data("configs/barycenter.json").to_str().unwrap()],
        tmp.path(),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("barycenter.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], Value::Bool(true));
    assert!(report["grad_norm"].as_f64().unwrap() < 1e-8);
}
