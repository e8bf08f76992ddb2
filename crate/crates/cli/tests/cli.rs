use std::path::Path;
use std::process::{Command, Output};

fn tabletop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabletop")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_a_log_that_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "swap_cups", "distractors": 3}"#);
    let log = dir.path().join("ep.jsonl").display().to_string();
    let out = tabletop(&["run", "--config", &cfg, "--seed", "4", "--log", &log]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let footer: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(footer["success"].is_boolean());

    let out = tabletop(&["replay", &log]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("ok:"));
}

#[test]
fn replay_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "pnp_twice"}"#);
    let log = dir.path().join("ep.jsonl");
    let out = tabletop(&["run", "--config", &cfg, "--seed", "1", "--planner", "mock_vlm_graph", "--log", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    v["planner"]["subtask_instruction"] = "pick up the moon".into();
    lines[1] = v.to_string();
    std::fs::write(&log, lines.join("\n")).unwrap();
    let out = tabletop(&["replay", log.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 0"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "swap_cups", "horizon": 0}"#);
    let out = tabletop(&["run", "--config", &cfg, "--seed", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "{not json");
    assert_eq!(tabletop(&["run", "--config", &cfg, "--seed", "0"]).status.code(), Some(2));
    let missing = dir.path().join("absent.json").display().to_string();
    assert_eq!(tabletop(&["suite", "--config", &missing, "--seeds", "2"]).status.code(), Some(2));
}

#[test]
fn suite_prints_a_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "pnp_twice"}"#);
    let json = dir.path().join("report.json").display().to_string();
    let out = tabletop(&[
        "suite", "--config", &cfg, "--seeds", "4", "--grid", "planner=code|markovian,vision", "--json", &json,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert_eq!(table.lines().count(), 2 + 4);
    assert!(table.lines().next().unwrap().starts_with("task"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);

    let out = tabletop(&["suite", "--config", &cfg, "--seeds", "2", "--grid", "weather"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_plan_reports_positions() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.plan");
    std::fs::write(&good, tabletop_core::dsl::corpus::PNP_TWICE).unwrap();
    let out = tabletop(&["validate-plan", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("pnp_twice"));

    let bad = dir.path().join("bad.plan");
    std::fs::write(&bad, "(policy p\n  (bind c (biggest \"cup\"))\n  (plan))").unwrap();
    let out = tabletop(&["validate-plan", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2:12"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn assoc_bench_reports_agreement() {
    let out = tabletop(&["assoc-bench", "--scenes", "20", "--sigma", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["identity_agree"], 20);
}

#[test]
fn unknown_planner_is_a_usage_error() {
    let out = tabletop(&["run", "--config", "x.json", "--seed", "0", "--planner", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
}
