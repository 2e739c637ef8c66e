use std::path::Path;
use std::process::{Command, Output};

use prefsynth_core::fixtures::two_road;
use prefsynth_core::io::model_to_json;
use serde_json::{json, Value};

fn prefsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefsynth")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_two_road(dir: &Path) -> String {
    let path = dir.join("two_road.json");
    std::fs::write(&path, model_to_json(&two_road())).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bounds_of_two_road() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_two_road(dir.path());
    let o = prefsynth(&["bounds", "--model", &model, "--interval", "0.2:0.8,0.2:0.8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o), json!({"lower": [1, 0], "upper": [2, 1]}));
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    let broken = r#"{"states": 2, "initial": 0, "end": [1],
        "actions": [{"state": 0, "name": "go", "transitions": [[1, 0.5]]}]}"#;
    std::fs::write(&path, broken).unwrap();
    let o = prefsynth(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let doc = stdout_json(&o);
    assert_eq!(doc["valid"], false);
    assert!(!doc["violations"].as_array().unwrap().is_empty());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");

    let model = write_two_road(dir.path());
    let o = prefsynth(&["validate", "--model", &model]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["valid"], true);
}

#[test]
fn synthesize_writes_lp_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("out.lp");
    let o = prefsynth(&[
        "synthesize",
        "--map",
        "two-road",
        "--interval",
        "0.2:0.8,0.2:0.8",
        "--export-lp",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = stdout_json(&o);
    assert_eq!(doc["penalty"], 0);
    assert_eq!(doc["multiStrategy"]["s0"], json!(["short", "long"]));
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.starts_with("Minimize\n") && text.ends_with("End\n"));
}

#[test]
fn export_lp_matches_golden_file() {
    let o = prefsynth(&["export-lp", "--map", "two-road", "--interval", "0.2:0.8,0.2:0.8"]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/golden/two_road.lp")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), golden);
}

#[test]
fn elicit_methods() {
    let o = prefsynth(&["elicit", "--method", "likert", "--data", "[5,5]"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o), json!({"weights": [0.5, 0.5]}));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("answers.json");
    let payloads = json!([
        {"method": "direct", "data": [0.3, 0.7]},
        {"method": "likert", "data": [5, 5]},
        {"method": "pairwise_names", "data": {"n": 2, "choices": [{"i": 0, "j": 1, "preferred": 0}]}}
    ]);
    std::fs::write(&path, payloads.to_string()).unwrap();
    let o = prefsynth(&["elicit", "--payload", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let doc = stdout_json(&o);
    let lower: Vec<f64> = serde_json::from_value(doc["interval"]["lower"].clone()).unwrap();
    let upper: Vec<f64> = serde_json::from_value(doc["interval"]["upper"].clone()).unwrap();
    assert!((lower[0] - 0.3).abs() < 1e-12 && (upper[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((lower[1] - 1.0 / 3.0).abs() < 1e-12 && (upper[1] - 0.7).abs() < 1e-12);

    let o = prefsynth(&["elicit", "--method", "likert", "--data", "[9,5]"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn grid_and_pareto() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("map.txt");
    std::fs::write(&grid, "S.D\n...\n").unwrap();
    let out = dir.path().join("grid.json");
    let o = prefsynth(&["grid", "--grid", grid.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = prefsynth(&["validate", "--model", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let o = prefsynth(&["pareto", "--map", "grid3x3", "--weights", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let doc = stdout_json(&o);
    assert_eq!(doc["route"]["routes"].as_array().unwrap().len(), 1);

    let a = prefsynth(&["pareto", "--map", "grid3x3", "--samples", "3", "--seed", "4"]);
    let b = prefsynth(&["pareto", "--map", "grid3x3", "--samples", "3", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout_json(&a).as_array().unwrap().len(), 3);

    let o = prefsynth(&["pareto", "--map", "two-road", "--frontier"]);
    assert_eq!(stdout_json(&o)["frontier"], json!([[1, 1], [2, 0]]));
}

#[test]
fn exit_codes() {
    assert_eq!(prefsynth(&[]).status.code(), Some(2));
    assert_eq!(prefsynth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(prefsynth(&["bounds", "--interval", "0.5:0.5,0.5:0.5"]).status.code(), Some(2));
    assert_eq!(prefsynth(&["--help"]).status.code(), Some(0));
    let o = prefsynth(&["bounds", "--map", "two-road", "--interval", "0.8:0.9,0.8:0.9"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    let o = prefsynth(&["bounds", "--map", "nowhere", "--interval", "0.5:0.5,0.5:0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = prefsynth(&["bounds", "--model", "/nonexistent.json", "--interval", "0.5:0.5,0.5:0.5"]);
    assert_eq!(o.status.code(), Some(1));
}
