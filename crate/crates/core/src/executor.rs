//! Scripted low-level policy: grounds the subtask's targets from the
//! (possibly masked) observation and expands the verb into primitives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, SemanticGraph};
use crate::prompting::MaskedObservation;
use crate::rng::SimRng;
use crate::scene::{apply_primitive, ObjectId, Primitive, PrimitiveKind, PrimitiveResult, Relation, SceneError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Clutter is the number of distinct non-relevant objects with at least
    /// one visible pixel.
    #[default]
    CountVisiblePixelsObjects,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingErrorModel {
    pub base_p: f64,
    pub per_distractor_p: f64,
    pub p_max: f64,
    pub mode: ErrorMode,
}

impl GroundingErrorModel {
    pub fn default_profile() -> Self {
        Self { base_p: 0.05, per_distractor_p: 0.02, p_max: 0.5, mode: ErrorMode::CountVisiblePixelsObjects }
    }

    /// Mis-grounding probability with `n` visible non-relevant objects.
    pub fn probability(&self, n: usize) -> f64 {
        (self.base_p + self.per_distractor_p * n as f64).min(self.p_max)
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.base_p) || !unit(self.p_max) || !(self.per_distractor_p >= 0.0) {
            return Err("executor_error: base_p, p_max in [0, 1] and per_distractor_p >= 0".into());
        }
        if self.base_p > self.p_max {
            return Err("executor_error.base_p must not exceed p_max".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("no verb pattern matches `{0}`")]
    UnknownVerbPattern(String),
    #[error("target `{0}` is not a graph node")]
    UnknownTarget(String),
    #[error("target `{0}` is invisible and no relation explains it")]
    TargetInvisible(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Pick,
    PutInside,
    StackOn,
    PlaceOn,
}

/// A parsed subtask cue: verb plus named roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtask {
    pub verb: Verb,
    /// `("object", name)` and, for two-place verbs, `("target", name)`.
    pub roles: Vec<(String, String)>,
}

fn single_word(s: &str) -> Option<&str> {
    (!s.is_empty() && !s.contains(char::is_whitespace)).then_some(s)
}

pub fn parse_subtask(cue: &str) -> Result<Subtask, ExecError> {
    let bad = || ExecError::UnknownVerbPattern(cue.to_string());
    let two = |rest: &str, sep: &str| -> Option<(String, String)> {
        let (x, y) = rest.split_once(sep)?;
        let y = y.strip_prefix("the ")?;
        Some((single_word(x)?.to_string(), single_word(y)?.to_string()))
    };
    let roles2 = |(x, y): (String, String)| vec![("object".to_string(), x), ("target".to_string(), y)];
    if let Some(rest) = cue.strip_prefix("pick up the ") {
        let x = single_word(rest).ok_or_else(bad)?;
        return Ok(Subtask { verb: Verb::Pick, roles: vec![("object".into(), x.into())] });
    }
    if let Some(rest) = cue.strip_prefix("put the ") {
        return Ok(Subtask { verb: Verb::PutInside, roles: roles2(two(rest, " inside ").ok_or_else(bad)?) });
    }
    if let Some(rest) = cue.strip_prefix("stack the ") {
        return Ok(Subtask { verb: Verb::StackOn, roles: roles2(two(rest, " on ").ok_or_else(bad)?) });
    }
    if let Some(rest) = cue.strip_prefix("place the ") {
        return Ok(Subtask { verb: Verb::PlaceOn, roles: roles2(two(rest, " on ").ok_or_else(bad)?) });
    }
    Err(bad())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounded {
    pub verb: Verb,
    /// Role to the simulator object the executor will act on.
    pub targets: BTreeMap<String, ObjectId>,
    pub mis_grounded: bool,
    /// Visible non-relevant objects counted by the error model.
    pub clutter: usize,
}

fn explained_invisible(graph: &SemanticGraph, id: NodeId) -> bool {
    graph.edges.iter().any(|e| {
        (e.src == id && e.relation == Relation::In) || (e.dst == id && e.relation == Relation::Holding)
    })
}

/// Bind the cue's named nodes to objects. With probability
/// `err.probability(n)` one role is rebound to a uniformly random visible
/// object instead.
pub fn ground_targets(
    obs: &MaskedObservation,
    graph: &SemanticGraph,
    rng: &mut SimRng,
    err: &GroundingErrorModel,
) -> Result<Grounded, ExecError> {
    let subtask = parse_subtask(&obs.subtask_cue)?;
    let mut targets = BTreeMap::new();
    for (role, name) in &subtask.roles {
        let node = graph.node_by_name(name).ok_or_else(|| ExecError::UnknownTarget(name.clone()))?;
        if !node.visible && !explained_invisible(graph, node.node_id) {
            return Err(ExecError::TargetInvisible(name.clone()));
        }
        let obj = node.track.target.ok_or_else(|| ExecError::TargetInvisible(name.clone()))?;
        targets.insert(role.clone(), obj);
    }
    let mut relevant: Vec<u32> = obs
        .relevant_ids
        .iter()
        .chain(graph.arm().as_ref())
        .filter_map(|&id| graph.node(id).and_then(|n| n.track.target))
        .map(|o| o.0)
        .collect();
    relevant.extend(targets.values().map(|o| o.0));
    let visible = obs.visible_labels();
    let clutter = visible.iter().filter(|l| !relevant.contains(l)).count();
    let mut mis_grounded = false;
    if rng.chance(err.probability(clutter)) && !visible.is_empty() {
        let roles: Vec<String> = targets.keys().cloned().collect();
        let role = &roles[rng.index(roles.len())];
        let pick = ObjectId(visible[rng.index(visible.len())]);
        if targets[role] != pick {
            mis_grounded = true;
            targets.insert(role.clone(), pick);
        }
    }
    Ok(Grounded { verb: subtask.verb, targets, mis_grounded, clutter })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkOutcome {
    Completed,
    Rejected,
    MisGrounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub primitives: Vec<Primitive>,
    pub grounded_targets: BTreeMap<String, ObjectId>,
    pub outcome: ChunkOutcome,
}

/// Primitives for a grounded verb, before the horizon cut.
fn expand(world: &WorldState, g: &Grounded) -> Vec<Primitive> {
    let p = Primitive::new;
    let object = g.targets.get("object").copied();
    let target = g.targets.get("target").copied();
    match g.verb {
        Verb::Pick => {
            let x = object.expect("pick has an object");
            match world.held() {
                Some(h) if h == x => vec![p(PrimitiveKind::NoOp)],
                Some(h) => {
                    let r = world.get(h).map_or(0.05, |o| o.radius());
                    match world.find_free_spot(world.gripper_slot, r, Some(h)) {
                        Some(spot) => vec![p(PrimitiveKind::PlaceAt(spot)), p(PrimitiveKind::NoOp), p(PrimitiveKind::Pick(x))],
                        None => vec![p(PrimitiveKind::NoOp), p(PrimitiveKind::Pick(x))],
                    }
                }
                None => vec![p(PrimitiveKind::NoOp), p(PrimitiveKind::Pick(x))],
            }
        }
        Verb::PutInside => vec![p(PrimitiveKind::NoOp), p(PrimitiveKind::PlaceIn(target.expect("put has a target")))],
        Verb::StackOn | Verb::PlaceOn => {
            vec![p(PrimitiveKind::NoOp), p(PrimitiveKind::PlaceOn(target.expect("stack has a target")))]
        }
    }
}

/// Run up to `horizon` primitives for the grounded subtask. Returns the
/// final world, the chunk, and the world after each executed primitive.
pub fn execute_chunk(
    world: &WorldState,
    grounded: &Grounded,
    horizon: u32,
) -> Result<(WorldState, ActionChunk, Vec<WorldState>), ExecError> {
    let mut cur = world.clone();
    let mut states = Vec::new();
    let mut done = Vec::new();
    let mut rejected = false;
    for prim in expand(world, grounded).into_iter().take(horizon.max(1) as usize) {
        let (next, result) = apply_primitive(&cur, &prim)?;
        done.push(prim);
        cur = next;
        states.push(cur.clone());
        if let PrimitiveResult::Rejected(_) = result {
            rejected = true;
            break;
        }
    }
    let outcome = if rejected {
        ChunkOutcome::Rejected
    } else if grounded.mis_grounded {
        ChunkOutcome::MisGrounded
    } else {
        ChunkOutcome::Completed
    };
    Ok((cur, ActionChunk { primitives: done, grounded_targets: grounded.targets.clone(), outcome }, states))
}
