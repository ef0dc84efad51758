use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = r#"{
  "anchors": [
    {"id": "A1", "position": [0.0, 0.0, 2.5], "orientation": {"roll": -40.0, "pitch": 0.0, "yaw": -45.0}},
    {"id": "A2", "position": [8.0, 0.0, 2.5], "orientation": {"roll": -40.0, "pitch": 0.0, "yaw": 45.0}},
    {"id": "A3", "position": [8.0, 6.0, 2.5], "orientation": {"roll": -40.0, "pitch": 0.0, "yaw": 135.0}}
  ],
  "tags": [
    {"id": "T1", "position": [4.0, 3.0, 1.0]},
    {"id": "T2", "position": [2.0, 4.0, 1.0]},
    {"id": "T3", "position": [6.0, 2.0, 1.2]},
    {"id": "T4", "position": [5.0, 4.5, 0.8]}
  ],
  "seed": 3,
  "samples_per_tag": 4
}"#;

fn aoa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path) {
    std::fs::write(dir.join("scenario.json"), SCENARIO).unwrap();
    let o = aoa(dir, &["simulate", "--scenario", "scenario.json", "--out-measurements", "m.csv", "--out-anchors", "surveyed.json", "--out-truth", "truth.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn positioning_with_uncalibrated_anchors_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = aoa(dir.path(), &["position", "--measurements", "m.csv", "--anchors", "surveyed.json", "--out", "fixes.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("has no orientation"), "{}", stderr(&o));
    assert!(!dir.path().join("fixes.csv").exists());
}

#[test]
fn calibration_with_too_few_tags_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = aoa(
        dir.path(),
        &["calibrate", "--measurements", "m.csv", "--anchors", "surveyed.json", "--tags-truth", "truth.json", "--anchor-id", "A1", "--min-tags", "6", "--out", "a.json"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("insufficient calibration geometry"), "{}", stderr(&o));
    assert!(!dir.path().join("a.json").exists());
}

#[test]
fn calibrate_single_anchor_and_report_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = aoa(
        dir.path(),
        &["calibrate", "--measurements", "m.csv", "--anchors", "surveyed.json", "--tags-truth", "truth.json", "--anchor-id", "A2", "--out", "a.json"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.starts_with("id,R_x,R_y,R_z,"), "{table}");
    assert_eq!(table.lines().count(), 2);
    let anchors = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    assert!(anchors.contains("\"calibrated\""));
    assert_eq!(anchors.matches("orientation_std").count(), 1);
}

#[test]
fn unknown_anchor_id_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = aoa(
        dir.path(),
        &["calibrate", "--measurements", "m.csv", "--anchors", "surveyed.json", "--tags-truth", "truth.json", "--anchor-id", "A9", "--out", "a.json"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("A9"));
}

#[test]
fn malformed_json_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("anchors.json"),
        r#"{"anchors": [{"id": "A1", "position": [0.0, "x", 2.5]}]}"#,
    )
    .unwrap();
    let o = aoa(dir.path(), &["heatmap", "--anchors", "anchors.json", "--bounds", "0,4,0,4", "--cell", "1", "--out", "g.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("anchors[0].position"), "{}", stderr(&o));
}

#[test]
fn heatmap_writes_a_raster() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let o = aoa(dir.path(), &["heatmap", "--anchors", "surveyed.json", "--bounds", "-1,9,0,6", "--cell", "0.5", "--out", "grid.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert!(grid.lines().count() >= 12);
    assert!(String::from_utf8_lossy(&o.stdout).contains("20x12 cells"));
}

#[test]
fn kinematic_evaluation_without_a_path_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    for args in [
        vec!["calibrate", "--measurements", "m.csv", "--anchors", "surveyed.json", "--tags-truth", "truth.json", "--out", "a.json", "--report", "cal.csv"],
        vec!["position", "--measurements", "m.csv", "--anchors", "a.json", "--out", "fixes.csv"],
    ] {
        let o = aoa(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = aoa(dir.path(), &["evaluate", "--fixes", "fixes.csv", "--truth", "truth.json", "--mode", "kinematic", "--out", "k.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = aoa(dir.path(), &["evaluate", "--fixes", "fixes.csv", "--truth", "truth.json", "--out", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);
}
