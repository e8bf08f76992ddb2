//! Persistent semantic-graph state: nodes with per-view mask groundings,
//! typed relation edges, and the planner's task memory.

mod assoc;
mod build;
mod relations;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bitmap::Mask;
use crate::perception::TrackState;
use crate::scene::Relation;

pub use assoc::{
    associate, associate_geometric, associate_semantic, distance_signature, signature_distance, AssocThresholds,
    Association, DetRef,
};
pub use build::{init_graph, update_graph, Perceiver};
pub use relations::{induce_relations, CONTAINMENT_RATIO, DILATION_PX, MIN_CONTACT_PX, NEAR_RATIO};

pub type NodeId = u32;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("no anchors in view `{0}`")]
    NoAnchors(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Rounds to 9 significant digits so logged floats are stable across
/// formatting implementations.
pub(crate) fn sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn ser_centroid<S: serde::Serializer>(c: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
    (sig9(c.0), sig9(c.1)).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub mask: Mask,
    #[serde(serialize_with = "ser_centroid")]
    pub centroid: (f64, f64),
    pub area_px: u64,
}

impl Grounding {
    pub fn from_mask(mask: Mask) -> Option<Self> {
        let centroid = mask.centroid()?;
        Some(Self { area_px: mask.count(), centroid, mask })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub node_id: NodeId,
    pub name: String,
    pub class_name: String,
    pub attributes: BTreeMap<String, String>,
    /// Current groundings when `visible`, otherwise the last ones seen.
    pub groundings: BTreeMap<String, Grounding>,
    pub last_seen_step: u64,
    /// Grounded in at least one view at the current step.
    pub visible: bool,
    #[serde(skip)]
    pub feature: Vec<f64>,
    #[serde(skip)]
    pub track: TrackState,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
    pub since_step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
}

impl ViewInfo {
    pub fn diagonal(&self) -> f64 {
        ((self.width as f64).powi(2) + (self.height as f64).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SemanticGraph {
    pub step: u64,
    pub views: Vec<ViewInfo>,
    /// Sorted by node id.
    pub nodes: Vec<GraphNode>,
    /// Sorted by (src, dst, relation).
    pub edges: Vec<GraphEdge>,
    pub task_memory: Vec<String>,
    pub bindings: BTreeMap<String, NodeId>,
    pub next_id: NodeId,
    /// Relations induced from the current frame alone (no memory).
    #[serde(skip)]
    pub observed: Vec<GraphEdge>,
}

impl SemanticGraph {
    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.binary_search_by_key(&id, |n| n.node_id).ok().map(|i| &self.nodes[i])
    }

    pub fn node_by_name(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn view(&self, view_id: &str) -> Option<&ViewInfo> {
        self.views.iter().find(|v| v.view_id == view_id)
    }

    pub fn arm(&self) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.class_name == "arm").map(|n| n.node_id)
    }

    /// Nodes matching every given filter, ascending by id.
    pub fn objects_by(
        &self,
        class: Option<&str>,
        attributes: &BTreeMap<String, String>,
        inside: Option<NodeId>,
        on: Option<NodeId>,
    ) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| class.is_none_or(|c| n.class_name == c))
            .filter(|n| attributes.iter().all(|(k, v)| n.attributes.get(k) == Some(v)))
            .filter(|n| inside.is_none_or(|b| self.relation_holds(n.node_id, b, Relation::In)))
            .filter(|n| on.is_none_or(|b| self.relation_holds(n.node_id, b, Relation::On)))
            .map(|n| n.node_id)
            .collect()
    }

    fn out_edge(&self, x: NodeId, r: Relation) -> Option<NodeId> {
        self.edges.iter().find(|e| e.src == x && e.relation == r).map(|e| e.dst)
    }

    pub fn container_of(&self, x: NodeId) -> Option<NodeId> {
        self.out_edge(x, Relation::In)
    }

    pub fn supported_by(&self, x: NodeId) -> Option<NodeId> {
        self.out_edge(x, Relation::On)
    }

    pub fn holding(&self) -> Option<NodeId> {
        self.edges.iter().find(|e| e.relation == Relation::Holding).map(|e| e.dst)
    }

    /// Nodes of `class` with nothing in them.
    pub fn empty_containers(&self, class: &str) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.class_name == class)
            .filter(|n| !self.edges.iter().any(|e| e.relation == Relation::In && e.dst == n.node_id))
            .map(|n| n.node_id)
            .collect()
    }

    /// Near is symmetric; the other relations are directed.
    pub fn relation_holds(&self, a: NodeId, b: NodeId, r: Relation) -> bool {
        self.edges.iter().any(|e| {
            e.relation == r && ((e.src == a && e.dst == b) || (r == Relation::Near && e.src == b && e.dst == a))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    /// Parse a snapshot. Centroids are recomputed from the masks, since the
    /// serialized ones are rounded.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut g: Self = serde_json::from_str(text)?;
        for n in &mut g.nodes {
            for gr in n.groundings.values_mut() {
                if let Some(c) = gr.mask.centroid() {
                    gr.centroid = c;
                }
            }
        }
        Ok(g)
    }

    /// Check the structural invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut names = std::collections::BTreeSet::new();
        for w in self.nodes.windows(2) {
            if w[0].node_id >= w[1].node_id {
                return Err("nodes not sorted".into());
            }
        }
        for n in &self.nodes {
            if !names.insert(n.name.as_str()) {
                return Err(format!("duplicate node name `{}`", n.name));
            }
            for (v, g) in &n.groundings {
                if g.mask.centroid() != Some(g.centroid) || g.mask.count() != g.area_px {
                    return Err(format!("node {} grounding in `{v}` is inconsistent", n.node_id));
                }
            }
        }
        let arm = self.arm();
        let mut seen = std::collections::BTreeSet::new();
        let mut parent = std::collections::BTreeMap::new();
        for e in &self.edges {
            if e.src == e.dst {
                return Err(format!("self edge on {}", e.src));
            }
            if self.node(e.src).is_none() || self.node(e.dst).is_none() {
                return Err(format!("edge {}->{} has a missing endpoint", e.src, e.dst));
            }
            if !seen.insert((e.src, e.dst, e.relation)) {
                return Err("duplicate edge".into());
            }
            match e.relation {
                Relation::In | Relation::On => {
                    if parent.insert(e.src, e.dst).is_some() {
                        return Err(format!("node {} has two in/on parents", e.src));
                    }
                }
                Relation::Holding if Some(e.src) != arm => {
                    return Err("holding edge not from the arm".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}
