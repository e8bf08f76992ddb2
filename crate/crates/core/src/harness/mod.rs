//! Episode loop, planner baselines, logs, replay, and suites.

mod assoc_bench;
mod log;
mod mock;
mod suite;

use std::collections::BTreeSet;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SceneConfig};
use crate::dsl::{corpus, evaluate_policy, DslError, PlannerOutput, PlannerProgram};
use crate::executor::{execute_chunk, ground_targets, ActionChunk};
use crate::graph::{init_graph, update_graph, Perceiver, SemanticGraph};
use crate::perception::TaskSpec;
use crate::prompting::{clutter_free_obs, MaskedObservation};
use crate::rng::SimRng;
use crate::scene::{init_world, render_views, task_oracle, SceneError, WorldState};

pub use assoc_bench::{assoc_bench, bench_scene, min_cost_matching, AssocBenchReport};
pub use log::{read_log, replay, write_log, EpisodeLog, LogFooter, LogHeader, LogLine, ReplanRecord, LOG_VERSION};
pub use mock::MockPlanner;
pub use suite::{run_suite, Cell, CellReport, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    /// The corpus program with persistent task memory.
    Code,
    /// The same program with task memory wiped before every call.
    Markovian,
    /// Oracle chooser over current-frame relations, with injected latency.
    MockVlmRgb,
    /// Oracle chooser over the semantic graph, with injected latency.
    MockVlmGraph,
}

impl PlannerMode {
    pub const ALL: [PlannerMode; 4] =
        [PlannerMode::Code, PlannerMode::Markovian, PlannerMode::MockVlmRgb, PlannerMode::MockVlmGraph];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerMode::Code => "code",
            PlannerMode::Markovian => "markovian",
            PlannerMode::MockVlmRgb => "mock_vlm_rgb",
            PlannerMode::MockVlmGraph => "mock_vlm_graph",
        }
    }
}

impl FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown planner mode `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisionMode {
    Masked,
    Raw,
}

impl VisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            VisionMode::Masked => "masked",
            VisionMode::Raw => "raw",
        }
    }
}

impl FromStr for VisionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "masked" => Ok(VisionMode::Masked),
            "raw" => Ok(VisionMode::Raw),
            _ => Err(format!("unknown vision mode `{s}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("seed {seed}: {source}")]
    Scene { seed: u64, source: SceneError },
    #[error("no policy program for task `{0}`")]
    MissingProgram(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("log line {line}: {message}")]
    BadLog { line: usize, message: String },
    #[error("log written by `{found}`, this is `{expected}`")]
    VersionMismatch { expected: String, found: String },
    #[error("replay diverged at record {record} (step {step})")]
    DivergenceAt { record: usize, step: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Done,
    Budget,
    PlannerError,
    GroundingError,
}

enum Planner {
    Program { program: PlannerProgram, wipe_memory: bool },
    Mock(MockPlanner),
}

impl Planner {
    fn decide(&mut self, graph: &mut SemanticGraph) -> Result<PlannerOutput, DslError> {
        match self {
            Planner::Program { program, wipe_memory: false } => evaluate_policy(program, graph),
            Planner::Program { program, wipe_memory: true } => {
                let mut fresh = graph.clone();
                fresh.task_memory.clear();
                fresh.bindings.clear();
                evaluate_policy(program, &mut fresh)
            }
            Planner::Mock(m) => Ok(m.decide(graph)),
        }
    }
}

/// One episode's log plus the world after every primitive (starting with
/// the initial world).
#[derive(Debug, Clone)]
pub struct Episode {
    pub log: EpisodeLog,
    pub history: Vec<WorldState>,
}

/// Run one episode with the shipped program for the configured task.
pub fn run_episode(cfg: &SceneConfig, seed: u64, planner: PlannerMode, vision: VisionMode) -> Result<EpisodeLog, HarnessError> {
    Ok(run_traced(cfg, seed, planner, vision, None)?.log)
}

/// Run one episode, keeping the world history. `program` overrides the
/// shipped corpus program for the code and markovian modes.
pub fn run_traced(
    cfg: &SceneConfig,
    seed: u64,
    planner_mode: PlannerMode,
    vision: VisionMode,
    program: Option<&PlannerProgram>,
) -> Result<Episode, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let setup = cfg.setup();
    let mut world = init_world(cfg, seed).map_err(|source| HarnessError::Scene { seed, source })?;
    let spec = TaskSpec::for_task(setup);
    let p = Perceiver { spec: &spec, thresholds: &cfg.thresholds, noise: &cfg.perception_noise, cameras: &cfg.cameras };
    let mut perception_rng = SimRng::substream(seed, "perception");
    let mut executor_rng = SimRng::substream(seed, "executor");

    let mut raw = render_views(&world, &cfg.cameras);
    let mut graph = init_graph(&raw, &p, &mut perception_rng);
    let mut planner = match planner_mode {
        PlannerMode::Code | PlannerMode::Markovian => {
            let program = match program {
                Some(p) => p.clone(),
                None => corpus::program_for(setup).ok_or_else(|| HarnessError::MissingProgram(setup.task.as_str().into()))?,
            };
            Planner::Program { program, wipe_memory: planner_mode == PlannerMode::Markovian }
        }
        PlannerMode::MockVlmRgb | PlannerMode::MockVlmGraph => Planner::Mock(MockPlanner::new(
            setup,
            planner_mode == PlannerMode::MockVlmGraph,
            graph.clone(),
            SimRng::substream(seed, "planner"),
        )),
    };
    let injected_ns = match planner_mode {
        PlannerMode::MockVlmRgb | PlannerMode::MockVlmGraph => (cfg.mock_latency_s * 1e9).round() as u64,
        _ => 0,
    };

    let header = LogHeader {
        version: LOG_VERSION.to_string(),
        config_hash: cfg.hash_hex(),
        config: cfg.clone(),
        seed,
        task: setup.task,
        first_cup: setup.first_cup,
        planner: planner_mode,
        vision,
    };
    let mut history = vec![world.clone()];
    let mut records = Vec::new();
    let mut primitives = 0u32;
    let mut chunks = 0u32;
    let stop = loop {
        if primitives >= cfg.step_budget {
            break StopReason::Budget;
        }
        let t0 = Instant::now();
        let decision = planner.decide(&mut graph);
        let latency_ns = t0.elapsed().as_nanos() as u64 + injected_ns;
        let milestones = |h: &[WorldState]| -> Vec<String> {
            task_oracle(setup, h).map(|v| v.milestones.into_iter().collect()).unwrap_or_default()
        };
        let mut record = ReplanRecord {
            index: records.len() as u32,
            step: world.step_count,
            graph: graph.clone(),
            planner: PlannerOutput::default(),
            error: None,
            latency_ns,
            chunk: None,
            milestones: Vec::new(),
        };
        let out = match decision {
            Ok(o) => o,
            Err(e) => {
                record.error = Some(e.to_string());
                record.milestones = milestones(&history);
                records.push(record);
                break StopReason::PlannerError;
            }
        };
        record.planner = out.clone();
        if out.done {
            record.milestones = milestones(&history);
            records.push(record);
            break StopReason::Done;
        }
        let mut relevant: BTreeSet<_> = out.relevant_objects.clone();
        relevant.extend(graph.arm());
        let obs = match vision {
            VisionMode::Masked => clutter_free_obs(&raw, &graph, &relevant, &out.subtask_instruction),
            VisionMode::Raw => Ok(MaskedObservation::unmasked(&raw, &relevant, &out.subtask_instruction)),
        };
        let grounded = match obs {
            Ok(obs) => ground_targets(&obs, &graph, &mut executor_rng, &cfg.executor_error).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let grounded = match grounded {
            Ok(g) => g,
            Err(e) => {
                record.error = Some(e);
                record.milestones = milestones(&history);
                records.push(record);
                break StopReason::GroundingError;
            }
        };
        let (next, chunk, states) = match execute_chunk(&world, &grounded, cfg.horizon) {
            Ok(r) => r,
            Err(e) => {
                record.error = Some(e.to_string());
                record.milestones = milestones(&history);
                records.push(record);
                break StopReason::GroundingError;
            }
        };
        primitives += chunk.primitives.len() as u32;
        chunks += 1;
        world = next;
        history.extend(states);
        record.chunk = Some(chunk);
        record.milestones = milestones(&history);
        records.push(record);

        raw = render_views(&world, &cfg.cameras);
        graph = update_graph(&graph, &raw, &p, &mut perception_rng);
    };
    let verdict = task_oracle(setup, &history).map_err(|source| HarnessError::Scene { seed, source })?;
    let footer = LogFooter {
        success: verdict.success,
        milestones: verdict.milestones.into_iter().collect(),
        stop,
        total_steps: world.step_count,
        chunks,
        primitives,
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Episode { log: EpisodeLog { header, records, footer }, history })
}

impl EpisodeLog {
    /// Chunks executed (records that carry one).
    pub fn chunks(&self) -> Vec<&ActionChunk> {
        self.records.iter().filter_map(|r| r.chunk.as_ref()).collect()
    }

    /// Subtask instructions the planner emitted, in order.
    pub fn subtasks(&self) -> Vec<&str> {
        self.records
            .iter()
            .map(|r| r.planner.subtask_instruction.as_str())
            .filter(|s| !s.is_empty())
            .collect()
    }
}
