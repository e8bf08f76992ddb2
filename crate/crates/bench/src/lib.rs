//! Inputs for the pipeline benchmarks in `benches/`.

use tabletop_core::dsl::corpus;
use tabletop_core::graph::{init_graph, Perceiver};
use tabletop_core::perception::TaskSpec;
use tabletop_core::scene::{init_world, render_views, RawObservation};
use tabletop_core::{PlannerProgram, SceneConfig, SemanticGraph, SimRng, TaskId, WorldState};

/// One scene at the moment of a planner call.
pub struct Workload {
    pub cfg: SceneConfig,
    pub spec: TaskSpec,
    pub world: WorldState,
    pub raw: RawObservation,
    pub graph: SemanticGraph,
    pub program: PlannerProgram,
}

impl Workload {
    /// Default-noise swap scene with `distractors` clutter objects.
    pub fn swap(distractors: u32, seed: u64) -> Self {
        let cfg = SceneConfig::new(TaskId::SwapCups).with_distractors(distractors);
        let spec = TaskSpec::for_task(cfg.setup());
        let world = init_world(&cfg, seed).expect("benchmark layout is feasible");
        let raw = render_views(&world, &cfg.cameras);
        let graph = init_graph(&raw, &perceiver_for(&cfg, &spec), &mut SimRng::substream(seed, "perception"));
        let program = corpus::program_for(cfg.setup()).expect("swap ships a program");
        Workload { cfg, spec, world, raw, graph, program }
    }

    pub fn perceiver(&self) -> Perceiver<'_> {
        perceiver_for(&self.cfg, &self.spec)
    }
}

fn perceiver_for<'a>(cfg: &'a SceneConfig, spec: &'a TaskSpec) -> Perceiver<'a> {
    Perceiver { spec, thresholds: &cfg.thresholds, noise: &cfg.perception_noise, cameras: &cfg.cameras }
}
