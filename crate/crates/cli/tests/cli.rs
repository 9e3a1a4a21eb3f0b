use std::path::Path;
use std::process::{Command, Output};

use barkbeetle::VictimTree;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barkbeetle"))
        .args(args)
        .env_remove("BARKBEETLE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn gen_extract_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let recovered = dir.path().join("recovered.json");
    let report = dir.path().join("report.json");

    let out = run(&["gen", "--depth", "4", "--dup", "2", "--features", "3", "--seed", "9", "-o", path(&tree)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = VictimTree::load(&tree).unwrap();
    assert_eq!(truth.leaf_count(), 16);

    let out = run(&[
        "extract", "--tree", path(&tree), "--samples", "1000", "-o", path(&report), "--recovered", path(&recovered),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["attack"], "barkbeetle");
    assert_eq!(json["paths"], 16);
    assert_eq!(json["equivalence"]["mismatches"], 0);
    let total = json["total_queries"].as_u64().unwrap();
    assert_eq!(total, json["normal_queries"].as_u64().unwrap() + json["fault_runs"].as_u64().unwrap());

    let out = run(&["verify", "--truth", path(&tree), "--recovered", path(&recovered), "--grid", "0.05"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["mismatches"], 0);
    assert_eq!(json["grid"]["mismatches"], 0);
}

#[test]
fn verify_reports_differences_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (p, seed) in [(&a, "1"), (&b, "2")] {
        let out = run(&["gen", "--leaves", "6", "--depth-max", "4", "--features", "2", "--seed", seed, "-o", path(p)]);
        assert!(out.status.success());
    }
    let out = run(&["verify", "--truth", path(&a), "--recovered", path(&b), "--samples", "500"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn baseline_attack_lists_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    assert!(run(&["gen", "--leaves", "5", "--depth-max", "3", "--features", "2", "-o", path(&tree)]).status.success());
    let out = run(&["extract", "--tree", path(&tree), "--attack", "baseline", "--samples", "500"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["boxes"].as_array().unwrap().len(), 5);
    assert_eq!(json["fault_runs"], 0);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_barkbeetle"))
        .args(["gen", "--leaves", "8", "--depth-max", "5", "--features", "3"])
        .env("BARKBEETLE_SEED", "17")
        .output()
        .unwrap();
    let explicit = run(&["gen", "--leaves", "8", "--depth-max", "5", "--features", "3", "--seed", "17"]);
    let default = run(&["gen", "--leaves", "8", "--depth-max", "5", "--features", "3"]);
    assert!(with_env.status.success());
    assert_eq!(with_env.stdout, explicit.stdout);
    assert_ne!(with_env.stdout, default.stdout);
}

#[test]
fn sweep_writes_csv() {
    let out = run(&["sweep", "--mode", "depth", "--from", "1", "--to", "3", "--features", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "parameter,total_queries,fault_runs,normal_queries,glitch_attempts,leaves");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("3,") && lines[3].ends_with(",8"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"nodes\": []}").unwrap();
    let out = run(&["extract", "--tree", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    assert_eq!(run(&["extract"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--leaves", "4", "--depth-max", "1", "--features", "2"]).status.code(), Some(2));
}

#[test]
fn ambiguous_classification_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let doc = r#"{
        "format": "barkbeetle-tree-v1",
        "task": "classification",
        "features": [{"index": 0, "min": 0.0, "max": 10.0}, {"index": 1, "min": 0.0, "max": 10.0}],
        "nodes": [
            {"id": 0, "feature": 0, "threshold": 5.0, "left": 1, "right": 2},
            {"id": 1, "feature": 1, "threshold": 5.0, "left": 3, "right": 4},
            {"id": 2, "feature": 1, "threshold": 5.0, "left": 5, "right": 6}
        ],
        "leaves": [
            {"id": 3, "label": 0}, {"id": 4, "label": 1}, {"id": 5, "label": 2}, {"id": 6, "label": 0}
        ],
        "root": 0
    }"#;
    std::fs::write(&tree, doc).unwrap();
    let out = run(&["extract", "--tree", path(&tree)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn budget_exhaustion_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    assert!(run(&["gen", "--leaves", "20", "--depth-max", "8", "--features", "3", "-o", path(&tree)]).status.success());
    let out = run(&["extract", "--tree", path(&tree), "--max-queries", "25"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn glitch_config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let glitch = dir.path().join("glitch.json");
    assert!(run(&["gen", "--depth", "4", "--dup", "2", "--features", "3", "-o", path(&tree)]).status.success());
    std::fs::write(&glitch, r#"{"mode": "probabilistic", "success_prob": 0.25, "max_attempts": 500, "seed": 4}"#).unwrap();
    let out = run(&["extract", "--tree", path(&tree), "--glitch-config", path(&glitch), "--samples", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(json["glitch_attempts"].as_u64().unwrap() > json["fault_runs"].as_u64().unwrap());
    assert_eq!(json["config"]["glitch"]["success_prob"], 0.25);

    std::fs::write(&glitch, r#"{"mode": "probabilistic", "success_prob": 1e-12, "max_attempts": 1}"#).unwrap();
    let out = run(&["extract", "--tree", path(&tree), "--glitch-config", path(&glitch)]);
    assert_eq!(out.status.code(), Some(5));
}
