//! Deterministic tabletop manipulation stack: simulator, perception,
//! semantic-graph state, a small planning DSL, clutter-free prompting, a
//! scripted executor, and an evaluation harness.

pub mod bitmap;
pub mod config;
pub mod dsl;
pub mod executor;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod perception;
pub mod prompting;
pub mod rng;
pub mod scene;

pub use bitmap::{Mask, RleMask};
pub use dsl::{evaluate_policy, parse_program, DslError, PlannerOutput, PlannerProgram};
pub use config::{CameraSpec, ConfigError, SceneConfig, TaskId, TaskSetup};
pub use executor::{ActionChunk, ChunkOutcome, ExecError, GroundingErrorModel};
pub use harness::{run_episode, run_suite, EpisodeLog, HarnessError, PlannerMode, SuiteReport, VisionMode};
pub use graph::{GraphEdge, GraphNode, NodeId, SemanticGraph};
pub use prompting::{MaskedObservation, PromptError};
pub use rng::SimRng;
pub use scene::{ObjectId, Relation, WorldState};
