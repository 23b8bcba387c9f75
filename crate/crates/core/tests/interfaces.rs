//! End-to-end checks of the operational surface: CLI verbs, report files,
//! device-profile files, and scene files.

use pairsim::gpumodel::DeviceProfile;
use pairsim::report::{ReportRow, REPORT_HEADER};
use pairsim::scenario::SceneFile;
use std::process::Command;

fn pairsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairsim"))
}

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let status = pairsim()
        .args([
            "run",
            "--divisions",
            "2,4",
            "--avg-per-cell",
            "1,10",
            "--seed",
            "42",
            "--strategies",
            "all",
            "--kernel",
            "lj",
            "--profile",
            "t600",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        REPORT_HEADER.join(","),
        "header mismatch"
    );
    // 2 divisions x 2 averages x 7 strategies.
    assert_eq!(lines.count(), 28);
}

#[test]
fn run_emits_json_and_report_converts_it() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("rows.json");
    let status = pairsim()
        .args([
            "run",
            "--divisions",
            "2",
            "--avg-per-cell",
            "1",
            "--format",
            "json",
            "--out",
        ])
        .arg(&json)
        .status()
        .unwrap();
    assert!(status.success());
    let rows: Vec<ReportRow> = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.scenario == "d2_avg1_seed42"));

    let csv = dir.path().join("rows.csv");
    let status = pairsim()
        .args(["report", "--input"])
        .arg(&json)
        .args(["--format", "csv", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn gen_writes_a_readable_scene() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let status = pairsim()
        .args([
            "gen",
            "--divisions",
            "2",
            "--avg-per-cell",
            "1",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let scene = SceneFile::read(&path).unwrap();
    assert_eq!(scene.pos_x.len(), 8);
    assert_eq!(scene.grid.dims, [2, 2, 2]);
    let (parts, grid) = scene.into_scene();
    assert_eq!(parts.len(), 8);
    assert_eq!(grid.cell_count(), 8);
}

#[test]
fn compare_prints_verdicts() {
    let output = pairsim()
        .args([
            "compare",
            "--divisions",
            "2",
            "--avg-per-cell",
            "10",
            "--strategies",
            "par-part-noloop,x-pencil",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains("par-part-noloop"));
    assert!(stdout.contains("x-pencil"));
    assert!(stdout.lines().all(|l| l.contains(" ok ")));
}

#[test]
fn profile_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("custom.json");
    let profile = DeviceProfile {
        num_sms: 12,
        ..DeviceProfile::t600()
    };
    std::fs::write(&path, serde_json::to_string(&profile).unwrap()).unwrap();
    let status = pairsim()
        .args(["run", "--divisions", "2", "--avg-per-cell", "1", "--profile"])
        .arg(&path)
        .args(["--out"])
        .arg(dir.path().join("r.csv"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn unknown_strategy_fails_fast() {
    let output = pairsim()
        .args(["run", "--divisions", "2", "--avg-per-cell", "1", "--strategies", "warp-magic"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("unknown strategy"));
}

#[test]
fn unknown_profile_fails_fast() {
    let output = pairsim()
        .args(["run", "--divisions", "2", "--avg-per-cell", "1", "--profile", "h100"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}
