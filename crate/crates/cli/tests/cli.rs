use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn homext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homext"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&fs::read(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn extend_identity_draws_identical_meshes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = homext(&["extend", "--depth", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = read_dir(&out);
    assert_eq!(files["source.svg"], files["image.svg"]);
    let manifest = json(&out, "manifest.json");
    let names: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["config.json", "mesh.json", "source.svg", "image.svg", "homeomorphism.json"]);
    assert_eq!(json(&out, "mesh.json")["cells"].as_array().unwrap().len(), 15);
}

#[test]
fn energy_identity_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = homext(&["energy", "--depth", "14", "--p", "1", "--beta", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let report = json(&out, "energy.json");
    let total = report["extrapolated_total"].as_f64().unwrap();
    assert!((total - 8.0 / 3.0).abs() < 1e-3, "{total}");
    let csv = fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn snowflake_counts_and_perimeter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = homext(&["snowflake", "--p", "0.3333333333333333", "--depth", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let state = json(&out, "state.json");
    let last = state["levels"][5].as_array().unwrap();
    assert_eq!(last.len(), 4096);
    let perimeter: f64 = last
        .iter()
        .map(|s| {
            let seg = &s["segment"];
            let dx = seg[1]["x"].as_f64().unwrap() - seg[0]["x"].as_f64().unwrap();
            let dy = seg[1]["y"].as_f64().unwrap() - seg[0]["y"].as_f64().unwrap();
            dx.hypot(dy)
        })
        .sum();
    let expected = 4.0 * (4.0f64 / 3.0).powi(5);
    assert!((perimeter - expected).abs() / expected < 1e-12);
    assert!(fs::read_to_string(out.join("curve.svg")).unwrap().contains("<path d=\"M0,0L"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"phi":{"type":"cantor","params":{"theta":0.3}},"depth":6,
            "energy":{"p":1.5,"beta":0.3},
            "snowflake":{"p":0.3,"generation":4,"oracle":{"kind":"seeded","seed":11,"bump_probability":0.5}},
            "seed":42}"#,
    )
    .unwrap();
    for cmd in ["extend", "energy", "snowflake", "verify", "bound"] {
        let out = tmp.path().join(cmd);
        let args = [cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        assert!(homext(&args).status.success(), "{cmd}");
        let first = read_dir(&out);
        assert!(homext(&args).status.success(), "{cmd}");
        assert_eq!(first, read_dir(&out), "{cmd}");
    }
}

#[test]
fn validation_errors_exit_two_with_json() {
    for args in [
        vec!["energy", "--p", "2"],
        vec!["energy", "--p", "1.9", "--beta", "0.6"],
        vec!["snowflake", "--p", "0.5"],
        vec!["frobnicate"],
        vec![],
    ] {
        let o = homext(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
        assert_eq!(err["error"]["kind"], "validation");
    }
}

#[test]
fn failing_suite_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    // |t|^30 flattens the image cells near the origin below double precision.
    fs::write(&cfg, r#"{"command":"verify","depth":10,"phi":{"type":"power","params":{"gamma":30}}}"#).unwrap();
    let out = tmp.path().join("run");
    let o = homext(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&out, "verify.json");
    assert_eq!(v["passed"], false);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn json_logs_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = homext(&["bound", "--depth", "6", "--json-logs", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.lines().count() >= 3);
    for line in stderr.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}
