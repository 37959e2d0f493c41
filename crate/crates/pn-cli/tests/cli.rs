//! End-to-end tests of the `pnreal` binary: exit codes, report files,
//! determinism, and the catalog emission path.

use std::path::PathBuf;
use std::process::{Command, Output};

fn pnreal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnreal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn emit_catalog(dir: &std::path::Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{}.json", name));
    let out = pnreal(&["catalog", name, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "catalog emission failed: {:?}", out);
    path
}

#[test]
fn catalog_listing_and_emission() {
    let out = pnreal(&["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("toda-volterra"));
    assert!(text.contains("constant-symplectic"));

    let dir = tempfile::tempdir().unwrap();
    let path = emit_catalog(dir.path(), "diagonal-quadratic");
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(parsed["dimension"], 3);
    assert_eq!(parsed["connection"]["mode"], "explicit");
}

#[test]
fn check_passes_on_catalog_file_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "toda-volterra");
    let report = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let out = pnreal(&[
        "check",
        file.to_str().unwrap(),
        "--samples",
        "15",
        "--out",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", out.stderr);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["verdict"], "pass");
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("name,status,max_residual"));
    assert!(csv_text.contains("nijenhuis-torsion,pass"));
}

#[test]
fn check_fails_with_incompatible_connection() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "diagonal-quadratic");
    let mut parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    parsed["connection"] = serde_json::json!({"mode": "zero"});
    std::fs::write(&file, serde_json::to_string(&parsed).unwrap()).unwrap();
    let out = pnreal(&["check", file.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let rep: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "fail");
}

#[test]
fn usage_and_input_errors_exit_2() {
    let out = pnreal(&["check", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dimension\": 0}").unwrap();
    let out = pnreal(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = pnreal(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn realize_rejects_solve_mode() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "diagonal-quadratic");
    let mut parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    parsed["connection"] = serde_json::json!({"mode": "solve"});
    std::fs::write(&file, serde_json::to_string(&parsed).unwrap()).unwrap();
    let out = pnreal(&["realize", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("explicit"), "message: {}", err);
}

#[test]
fn realize_passes_on_calibration_instance() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "constant-symplectic");
    let out = pnreal(&[
        "realize",
        file.to_str().unwrap(),
        "--samples",
        "5",
        "--steps",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", out.stderr);
    let rep: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "pass");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "diagonal-quadratic");
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for r in [&r1, &r2] {
        let out = pnreal(&[
            "check",
            file.to_str().unwrap(),
            "--samples",
            "12",
            "--seed",
            "7",
            "--out",
            r.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(
        std::fs::read(&r1).unwrap(),
        std::fs::read(&r2).unwrap(),
        "reports differ between identical runs"
    );
}

#[test]
fn sweep_and_pencil_are_informational() {
    let dir = tempfile::tempdir().unwrap();
    let file = emit_catalog(dir.path(), "constant-symplectic");
    let out = pnreal(&[
        "sweep",
        file.to_str().unwrap(),
        "--ymax-list",
        "0.05,0.1",
        "--samples",
        "3",
        "--steps",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", out.stderr);

    let f2 = emit_catalog(dir.path(), "identity-n");
    let out = pnreal(&[
        "pencil",
        f2.to_str().unwrap(),
        f2.to_str().unwrap(),
        "--s-list",
        "0.0,0.5",
        "--samples",
        "3",
        "--steps",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {:?}", out.stderr);
    let rep: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "pass");
}
