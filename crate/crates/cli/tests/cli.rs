//! End-to-end tests of the binary: exit codes, report shape, policy
//! overrides and byte-level determinism.

use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::{Command, Output};

fn kronweb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kronweb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_manifest(name: &str, manifest: &Value) -> PathBuf {
    let path = std::env::temp_dir().join(format!("kronweb-test-{}-{}.json", std::process::id(), name));
    std::fs::write(&path, serde_json::to_string(manifest).unwrap()).unwrap();
    path
}

fn jk_manifest() -> Value {
    json!({
        "schema": 1,
        "task": "jk",
        "payload": {
            "s1": [["1", "0"], ["0", "1"]],
            "s2": [["2", "0"], ["0", "3"]],
        }
    })
}

#[test]
fn run_jk_manifest_reports_block_structure() {
    let path = write_manifest("jk", &jk_manifest());
    let out = kronweb(&["run", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report_text = stdout.rsplit_once("\n}").map(|(a, _)| format!("{}\n}}", a)).unwrap();
    let report: Value = serde_json::from_str(&report_text).unwrap();
    assert_eq!(report["task"], "jk");
    assert_eq!(report["passed"], true);
    let detail = &report["items"][0]["detail"];
    assert_eq!(detail["display"], "j_2(1) + j_3(1)");
    std::fs::remove_file(path).ok();
}

#[test]
fn verdict_failure_exits_one() {
    // an operator with nonvanishing torsion is not a PNO
    let manifest = json!({
        "schema": 1,
        "task": "pno-check",
        "payload": {
            "pno": {
                "chart": ["x1", "x2"],
                "spanning": [["1", "0"], ["0", "1"]],
                "images": [["x2", "0"], ["0", "x1"]],
            }
        }
    });
    let path = write_manifest("badpno", &manifest);
    let out = kronweb(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(path).ok();
}

#[test]
fn validation_failures_exit_two() {
    // unsupported schema version
    let mut m = jk_manifest();
    m["schema"] = json!(99);
    let path = write_manifest("schema", &m);
    assert_eq!(kronweb(&["run", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(path).ok();

    // unknown payload field
    let mut m = jk_manifest();
    m["payload"]["extra"] = json!(1);
    let path = write_manifest("extra", &m);
    assert_eq!(kronweb(&["run", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(path).ok();

    // unknown task name
    let mut m = jk_manifest();
    m["task"] = json!("frobnicate");
    let path = write_manifest("task", &m);
    assert_eq!(kronweb(&["run", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(path).ok();

    // missing file
    assert_eq!(kronweb(&["run", "/nonexistent/manifest.json"]).status.code(), Some(2));

    // unknown demo
    assert_eq!(kronweb(&["demo", "frobnicate"]).status.code(), Some(2));
}

#[test]
fn validate_checks_without_running() {
    let path = write_manifest("validate", &jk_manifest());
    let out = kronweb(&["validate", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok: task `jk`"));
    std::fs::remove_file(path).ok();
}

#[test]
fn reports_are_deterministic() {
    let manifest = json!({
        "schema": 1,
        "task": "up-construct",
        "policy": {"seed": 5},
        "payload": {
            "pno": {
                "chart": ["x1", "x2", "x3"],
                "spanning": [["1", "0", "0"]],
                "images": [["0", "1", "0"]],
            }
        }
    });
    let path = write_manifest("det", &manifest);
    let out1 = std::env::temp_dir().join("kronweb-test-det-1.json");
    let out2 = std::env::temp_dir().join("kronweb-test-det-2.json");
    for o in [&out1, &out2] {
        let r = kronweb(&["run", path.to_str().unwrap(), "--out", o.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap()
    );
    for p in [path, out1, out2] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn flag_overrides_reach_the_report() {
    let path = write_manifest("flags", &jk_manifest());
    let out = kronweb(&[
        "run",
        path.to_str().unwrap(),
        "--seed",
        "9",
        "--samples",
        "7",
        "--tol",
        "1e-6",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report_text = stdout.rsplit_once("\n}").map(|(a, _)| format!("{}\n}}", a)).unwrap();
    let report: Value = serde_json::from_str(&report_text).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["samples"], 7);
    assert_eq!(report["tol"], 1e-6);
    std::fs::remove_file(path).ok();
}

#[test]
fn bundled_demos_pass() {
    // `pencil` is exercised separately in the acceptance suite; these
    // three are cheap enough to run here
    for name in ["hirota", "extension", "up-construct"] {
        let out = kronweb(&["demo", name]);
        assert!(
            out.status.success(),
            "demo {} failed: {}",
            name,
            String::from_utf8_lossy(&out.stdout)
        );
    }
}
