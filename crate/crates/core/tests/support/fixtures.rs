//! Frozen fixtures: graph snapshots with golden planner outputs, and a
//! reference episode log. Regenerate with `UPDATE_FIXTURES=1`.

use std::path::PathBuf;

use serde_json::json;
use tabletop_core::config::{SceneConfig, TaskId};
use tabletop_core::dsl::corpus;
use tabletop_core::harness::{run_episode, write_log, PlannerMode, VisionMode};
use tabletop_core::{evaluate_policy, parse_program, SemanticGraph};

pub const SNAPSHOTS: usize = 30;
pub const PROGRAMS: [(&str, &str); 3] =
    [("swap_cups", corpus::SWAP_CUPS), ("pnp_twice", corpus::PNP_TWICE), ("place_and_stack", corpus::PLACE_AND_STACK)];

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn updating() -> bool {
    std::env::var_os("UPDATE_FIXTURES").is_some()
}

pub fn snapshot_path(k: usize) -> PathBuf {
    dir().join(format!("graphs/snap_{k:02}.json"))
}

pub fn golden_outputs_path() -> PathBuf {
    dir().join("graphs/golden_outputs.jsonl")
}

pub fn golden_log_path() -> PathBuf {
    dir().join("golden_swap_seed7.jsonl")
}

/// Graphs the planner saw in noisy episodes of all three tasks: ten per
/// task, alternating between carried-over task memory and a fresh start.
pub fn capture_snapshots() -> Vec<SemanticGraph> {
    let mut out = Vec::with_capacity(SNAPSHOTS);
    for task in [TaskId::SwapCups, TaskId::PnpTwice, TaskId::PlaceAndStack] {
        let cfg = SceneConfig::new(task).with_distractors(3);
        for seed in 0..10u64 {
            let log = run_episode(&cfg, seed, PlannerMode::Code, VisionMode::Masked).expect("episode runs");
            let r = &log.records[seed as usize % log.records.len()];
            let mut g = r.graph.clone();
            if seed % 2 == 0 {
                g.task_memory.clear();
                g.bindings.clear();
            }
            out.push(g);
        }
    }
    out
}

/// One golden line: the program's output on the snapshot plus the memory
/// it left behind, or the error text.
pub fn golden_line(fixture: usize, program: &str, source: &str, graph: &SemanticGraph) -> String {
    let p = parse_program(source).expect("corpus parses");
    let mut g = graph.clone();
    let result = match evaluate_policy(&p, &mut g) {
        Ok(out) => json!({ "output": out, "task_memory": g.task_memory, "bindings": g.bindings }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({ "fixture": format!("snap_{fixture:02}"), "program": program, "result": result }).to_string()
}

pub fn write_all() {
    std::fs::create_dir_all(dir().join("graphs")).unwrap();
    let snaps = capture_snapshots();
    let mut golden = String::new();
    for (k, g) in snaps.iter().enumerate() {
        std::fs::write(snapshot_path(k), g.to_json()).unwrap();
        for (name, src) in PROGRAMS {
            golden.push_str(&golden_line(k, name, src, g));
            golden.push('\n');
        }
    }
    std::fs::write(golden_outputs_path(), golden).unwrap();
    let cfg = SceneConfig::new(TaskId::SwapCups).with_distractors(4);
    let log = run_episode(&cfg, 7, PlannerMode::Code, VisionMode::Masked).unwrap();
    write_log(&log, &golden_log_path()).unwrap();
}
