mod support;

use proptest::prelude::*;
use tabletop_core::config::{SceneConfig, TaskId};
use tabletop_core::harness::{run_episode, PlannerMode, VisionMode};
use tabletop_core::{evaluate_policy, parse_program, SemanticGraph};

use support::fixtures;

fn snapshot(k: usize) -> SemanticGraph {
    SemanticGraph::from_json(&std::fs::read_to_string(fixtures::snapshot_path(k)).unwrap()).unwrap()
}

#[test]
fn task_memory_only_grows_across_an_episode() {
    for task in [TaskId::SwapCups, TaskId::PnpTwice, TaskId::PlaceAndStack] {
        for seed in 0..20 {
            let log = run_episode(&SceneConfig::new(task).with_distractors(2), seed, PlannerMode::Code, VisionMode::Masked)
                .unwrap();
            for w in log.records.windows(2) {
                let (a, b) = (&w[0].graph.task_memory, &w[1].graph.task_memory);
                assert!(b.starts_with(a), "{task:?} seed {seed}: memory rewritten between records");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 90, ..ProptestConfig::default() })]

    /// A second call on an unchanged graph gives the same answer and adds
    /// nothing to memory.
    #[test]
    fn evaluation_is_idempotent(k in 0..fixtures::SNAPSHOTS, p in 0..fixtures::PROGRAMS.len()) {
        let program = parse_program(fixtures::PROGRAMS[p].1).unwrap();
        let mut g = snapshot(k);
        let first = evaluate_policy(&program, &mut g);
        let memory = g.task_memory.clone();
        let second = evaluate_policy(&program, &mut g);
        prop_assert_eq!(first, second);
        prop_assert_eq!(memory, g.task_memory);
    }

    /// Memory written by an earlier call is never dropped or reordered.
    #[test]
    fn evaluation_appends_to_memory(k in 0..fixtures::SNAPSHOTS, p in 0..fixtures::PROGRAMS.len()) {
        let program = parse_program(fixtures::PROGRAMS[p].1).unwrap();
        let mut g = snapshot(k);
        let before = g.task_memory.clone();
        let _ = evaluate_policy(&program, &mut g);
        prop_assert!(g.task_memory.starts_with(&before));
    }
}
