//! Oracle subtask choosers standing in for a VLM planner. They know each
//! task's stage sequence but keep no memory: every call enumerates (role
//! assignment, stage) hypotheses, keeps those consistent with what they can
//! see, and picks one uniformly.

use std::collections::BTreeSet;

use crate::config::{CupColor, TaskId, TaskSetup};
use crate::dsl::PlannerOutput;
use crate::graph::{GraphEdge, NodeId, SemanticGraph};
use crate::rng::SimRng;
use crate::scene::{class_catalog, Relation};

/// A predicted fact about the scene at some stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fact {
    In(NodeId, NodeId),
    On(NodeId, NodeId),
    Near(NodeId, NodeId),
    Held(NodeId),
    /// Resting on the table: no in/on parent and not held.
    Free(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Subtask {
    Pick(NodeId),
    PutInside(NodeId, NodeId),
    StackOn(NodeId, NodeId),
    Done,
}

#[derive(Debug, Clone)]
struct Hypothesis {
    stage: usize,
    facts: Vec<Fact>,
    /// Facts that hold at stage 0 under the same roles.
    initial: Vec<Fact>,
    subtask: Subtask,
}

fn permutations(items: &[NodeId]) -> Vec<Vec<NodeId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn class_nodes(g: &SemanticGraph, class: &str) -> Vec<NodeId> {
    g.nodes.iter().filter(|n| n.class_name == class).map(|n| n.node_id).collect()
}

fn staged(stages: Vec<(Vec<Fact>, Subtask)>) -> Vec<Hypothesis> {
    let initial = stages[0].0.clone();
    stages
        .into_iter()
        .enumerate()
        .map(|(stage, (facts, subtask))| Hypothesis { stage, facts, initial: initial.clone(), subtask })
        .collect()
}

fn swap_hypotheses(g: &SemanticGraph, first: CupColor) -> Vec<Hypothesis> {
    let cups = class_nodes(g, "cup");
    let f = cups.iter().copied().find(|&c| g.node(c).and_then(|n| n.attributes.get("color")).map(String::as_str) == Some(first.as_str()));
    let Some(f) = f else { return Vec::new() };
    let Some(o) = cups.iter().copied().find(|&c| c != f) else { return Vec::new() };
    let plates = class_nodes(g, "plate");
    if plates.len() < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for roles in permutations(&plates[..3]) {
        let (pf, po, b) = (roles[0], roles[1], roles[2]);
        use Fact::*;
        out.extend(staged(vec![
            (vec![In(f, pf), In(o, po)], Subtask::Pick(f)),
            (vec![Held(f), In(o, po)], Subtask::PutInside(f, b)),
            (vec![In(f, b), In(o, po)], Subtask::Pick(o)),
            (vec![In(f, b), Held(o)], Subtask::PutInside(o, pf)),
            (vec![In(f, b), In(o, pf)], Subtask::Pick(f)),
            (vec![Held(f), In(o, pf)], Subtask::PutInside(f, po)),
            (vec![In(f, po), In(o, pf)], Subtask::Done),
        ]));
    }
    out
}

fn pnp_hypotheses(g: &SemanticGraph) -> Vec<Hypothesis> {
    let Some(&c) = class_nodes(g, "cube").first() else { return Vec::new() };
    let plates = class_nodes(g, "plate");
    if plates.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for roles in permutations(&plates[..2]) {
        let (home, away) = (roles[0], roles[1]);
        use Fact::*;
        out.extend(staged(vec![
            (vec![In(c, home)], Subtask::Pick(c)),
            (vec![Held(c)], Subtask::PutInside(c, away)),
            (vec![In(c, away)], Subtask::Pick(c)),
            (vec![Held(c)], Subtask::PutInside(c, home)),
            (vec![In(c, home)], Subtask::Done),
        ]));
    }
    out
}

fn stack_hypotheses(g: &SemanticGraph) -> Vec<Hypothesis> {
    let Some(&c) = class_nodes(g, "cube").first() else { return Vec::new() };
    let cups = class_nodes(g, "cup");
    if cups.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for roles in permutations(&cups[..2]) {
        let (near, other) = (roles[0], roles[1]);
        use Fact::*;
        out.extend(staged(vec![
            (vec![Free(c), Near(c, near), Free(near), Free(other)], Subtask::Pick(c)),
            (vec![Held(c), Free(near), Free(other)], Subtask::PutInside(c, near)),
            (vec![In(c, near), Free(other)], Subtask::Pick(other)),
            (vec![In(c, near), Held(other)], Subtask::StackOn(other, near)),
            (vec![In(c, near), On(other, near)], Subtask::Done),
        ]));
    }
    out
}

fn hypotheses(setup: TaskSetup, g: &SemanticGraph) -> Vec<Hypothesis> {
    match setup.task {
        TaskId::SwapCups => swap_hypotheses(g, setup.first_cup),
        TaskId::PnpTwice => pnp_hypotheses(g),
        TaskId::PlaceAndStack => stack_hypotheses(g),
        TaskId::Custom => Vec::new(),
    }
}

/// What a chooser can see: a relation set and, for the frame-only chooser,
/// which nodes are visible.
struct View<'a> {
    g: &'a SemanticGraph,
    edges: &'a [GraphEdge],
    frame_only: bool,
}

impl View<'_> {
    fn has(&self, a: NodeId, b: NodeId, r: Relation) -> bool {
        self.edges.iter().any(|e| {
            e.relation == r && ((e.src == a && e.dst == b) || (r == Relation::Near && e.src == b && e.dst == a))
        })
    }

    fn held(&self) -> Option<NodeId> {
        self.edges.iter().find(|e| e.relation == Relation::Holding).map(|e| e.dst)
    }

    fn visible(&self, x: NodeId) -> bool {
        self.g.node(x).is_some_and(|n| n.visible)
    }

    fn opaque(&self, x: NodeId) -> bool {
        self.g.node(x).is_some_and(|n| class_catalog(&n.class_name).opaque)
    }

    fn holds(&self, f: Fact) -> bool {
        match f {
            Fact::In(x, c) if self.frame_only && self.opaque(c) => !self.visible(x) && self.held() != Some(x),
            Fact::In(x, c) => (!self.frame_only || self.visible(x)) && self.has(x, c, Relation::In),
            Fact::On(x, s) => self.has(x, s, Relation::On),
            Fact::Near(x, y) => self.has(x, y, Relation::Near),
            Fact::Held(x) => self.held() == Some(x),
            Fact::Free(x) => {
                (!self.frame_only || self.visible(x))
                    && self.held() != Some(x)
                    && !self.edges.iter().any(|e| e.src == x && matches!(e.relation, Relation::In | Relation::On))
            }
        }
    }

    fn consistent(&self, h: &Hypothesis) -> bool {
        let holds_something = h.facts.iter().any(|f| matches!(f, Fact::Held(_)));
        if !holds_something && self.held().is_some() {
            return false;
        }
        h.facts.iter().all(|&f| self.holds(f))
    }
}

#[derive(Debug, Clone)]
pub struct MockPlanner {
    setup: TaskSetup,
    /// Reads the persistent graph (plus the episode's first graph) instead
    /// of the current frame alone.
    use_graph: bool,
    initial: SemanticGraph,
    rng: SimRng,
}

impl MockPlanner {
    pub fn new(setup: TaskSetup, use_graph: bool, initial: SemanticGraph, rng: SimRng) -> Self {
        Self { setup, use_graph, initial, rng }
    }

    fn changed_since_start(&self, g: &SemanticGraph) -> bool {
        g.edges
            .iter()
            .any(|e| e.relation != Relation::Near && e.since_step > self.initial.step)
    }

    pub fn decide(&mut self, g: &SemanticGraph) -> PlannerOutput {
        let all = hypotheses(self.setup, g);
        let view = if self.use_graph {
            View { g, edges: &g.edges, frame_only: false }
        } else {
            View { g, edges: &g.observed, frame_only: true }
        };
        let mut keep: Vec<&Hypothesis> = all.iter().filter(|h| view.consistent(h)).collect();
        if self.use_graph {
            let start = View { g: &self.initial, edges: &self.initial.edges, frame_only: false };
            let moved = self.changed_since_start(g);
            keep.retain(|h| h.initial.iter().all(|&f| start.holds(f)) && (h.stage == 0) != moved);
        }
        let pool: Vec<&Hypothesis> = if keep.is_empty() { all.iter().collect() } else { keep };
        if pool.is_empty() {
            return PlannerOutput::finished();
        }
        let h = pool[self.rng.index(pool.len())];
        render(g, &h.subtask, h.stage)
    }
}

fn render(g: &SemanticGraph, s: &Subtask, stage: usize) -> PlannerOutput {
    let name = |x: NodeId| g.node(x).map_or_else(|| format!("node{x}"), |n| n.name.clone());
    let (text, focus): (String, BTreeSet<NodeId>) = match *s {
        Subtask::Pick(x) => (format!("pick up the {}", name(x)), [x].into()),
        Subtask::PutInside(x, y) => (format!("put the {} inside the {}", name(x), name(y)), [x, y].into()),
        Subtask::StackOn(x, y) => (format!("stack the {} on the {}", name(x), name(y)), [x, y].into()),
        Subtask::Done => return PlannerOutput::finished(),
    };
    PlannerOutput { subtask_instruction: text, relevant_objects: focus, done: false, emitted_step: Some(format!("stage{stage}")) }
}
