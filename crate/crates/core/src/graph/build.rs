//! Graph construction from the first observation and per-step updates.

use std::collections::{BTreeMap, BTreeSet};

use crate::config::CameraSpec;
use crate::perception::{
    cosine_distance, identify_relevant, segment, track, Detection, NoiseConfig, TaskSpec, TrackState,
};
use crate::rng::SimRng;
use crate::scene::{class_catalog, ObjectId, RawObservation, Relation};

use super::assoc::{associate, AnchorPoints, AssocThresholds, DetRef};
use super::relations::induce_relations;
use super::{GraphEdge, GraphNode, Grounding, NodeId, SemanticGraph, ViewInfo};

/// IoU with a tracked mask at which a fresh detection is merged into it.
const MERGE_IOU: f64 = 0.5;

/// Everything the graph pipeline needs besides the observation.
#[derive(Debug, Clone, Copy)]
pub struct Perceiver<'a> {
    pub spec: &'a TaskSpec,
    pub thresholds: &'a AssocThresholds,
    pub noise: &'a NoiseConfig,
    pub cameras: &'a [CameraSpec],
}

fn relevant_detections(raw: &RawObservation, p: &Perceiver<'_>, rng: &mut SimRng) -> Vec<Vec<Detection>> {
    segment(raw, p.noise, rng).iter().map(|ds| identify_relevant(ds, p.spec)).collect()
}

fn base_name(class: &str, attributes: &BTreeMap<String, String>) -> String {
    match attributes.get("color") {
        Some(c) => format!("{c}_{class}"),
        None => class.to_string(),
    }
}

fn unique_name(g: &SemanticGraph, base: &str) -> String {
    let taken: BTreeSet<&str> = g.nodes.iter().map(|n| n.name.as_str()).collect();
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..).map(|k| format!("{base}_{k}")).find(|n| !taken.contains(n.as_str())).expect("unbounded suffixes")
}

fn majority_source(dets: &[&Detection]) -> ObjectId {
    let mut counts: BTreeMap<ObjectId, usize> = BTreeMap::new();
    for d in dets {
        *counts.entry(d.source).or_default() += 1;
    }
    let max = *counts.values().max().expect("non-empty group");
    *counts.iter().find(|(_, &c)| c == max).expect("max exists").0
}

/// New node from one association group.
fn add_node(g: &mut SemanticGraph, dets: &[Vec<Detection>], group: &[DetRef]) -> NodeId {
    let members: Vec<&Detection> = group.iter().map(|&(v, i)| &dets[v][i]).collect();
    let first = members[0];
    let mut feature = vec![0.0; first.feature.len()];
    for d in &members {
        for (f, x) in feature.iter_mut().zip(&d.feature) {
            *f += x;
        }
    }
    let n = feature.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        feature.iter_mut().for_each(|x| *x /= n);
    }
    let id = g.next_id;
    g.next_id += 1;
    let groundings = members
        .iter()
        .map(|d| {
            let gr = Grounding { mask: d.mask.clone(), centroid: d.centroid, area_px: d.area_px };
            (d.view_id.clone(), gr)
        })
        .collect();
    let name = unique_name(g, &base_name(&first.class_name, &first.attributes));
    g.nodes.push(GraphNode {
        node_id: id,
        name,
        class_name: first.class_name.clone(),
        attributes: first.attributes.clone(),
        groundings,
        last_seen_step: g.step,
        visible: true,
        feature,
        track: TrackState::locked(majority_source(&members)),
    });
    id
}

fn views_of(raw: &RawObservation) -> Vec<ViewInfo> {
    raw.views
        .iter()
        .map(|v| ViewInfo { view_id: v.view_id.clone(), width: v.width, height: v.height })
        .collect()
}

/// Build the initial graph: segment, keep task-relevant detections,
/// associate across views, create one node per group, induce relations.
pub fn init_graph(raw: &RawObservation, p: &Perceiver<'_>, rng: &mut SimRng) -> SemanticGraph {
    let mut g = SemanticGraph { step: raw.step, views: views_of(raw), next_id: 1, ..SemanticGraph::default() };
    let dets = relevant_detections(raw, p, rng);
    let assoc = associate(&dets, p.thresholds, &[]);
    for group in &assoc.groups {
        add_node(&mut g, &dets, group);
    }
    refresh_edges(&mut g, None, raw, p.cameras);
    g
}

/// Advance the graph to a new observation: propagate tracked masks, merge
/// fresh detections into existing nodes, add nodes for the rest, keep
/// memory of unseen nodes, and refresh edges.
pub fn update_graph(prev: &SemanticGraph, raw: &RawObservation, p: &Perceiver<'_>, rng: &mut SimRng) -> SemanticGraph {
    let mut g = prev.clone();
    g.step = raw.step.max(prev.step);
    g.views = views_of(raw);
    let steps = raw.step.saturating_sub(prev.step);

    let mut states: Vec<TrackState> = g.nodes.iter().map(|n| n.track.clone()).collect();
    let tracked = track(&mut states, raw, steps, p.noise, rng);
    for (n, st) in g.nodes.iter_mut().zip(states) {
        n.track = st;
    }
    let dets = relevant_detections(raw, p, rng);

    let mut current: Vec<BTreeMap<String, Grounding>> = vec![BTreeMap::new(); g.nodes.len()];
    let mut leftovers: Vec<Vec<usize>> = vec![Vec::new(); dets.len()];
    for (vi, view) in raw.views.iter().enumerate() {
        let vid = &view.view_id;
        let mut node_taken = vec![false; g.nodes.len()];
        let mut det_taken = vec![false; dets[vi].len()];
        let mut merges: Vec<(usize, usize)> = Vec::new();

        let mut by_iou: Vec<(f64, usize, usize)> = Vec::new();
        for (di, d) in dets[vi].iter().enumerate() {
            for (ni, t) in tracked.iter().enumerate() {
                if let Some(Some(m)) = t.masks.get(vid) {
                    let iou = d.mask.iou(m);
                    if iou >= MERGE_IOU {
                        by_iou.push((iou, di, ni));
                    }
                }
            }
        }
        by_iou.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (_, di, ni) in by_iou {
            if !det_taken[di] && !node_taken[ni] {
                det_taken[di] = true;
                node_taken[ni] = true;
                merges.push((di, ni));
            }
        }

        let mut by_feature: Vec<(f64, usize, usize)> = Vec::new();
        for (di, d) in dets[vi].iter().enumerate().filter(|(di, _)| !det_taken[*di]) {
            for (ni, n) in g.nodes.iter().enumerate().filter(|(ni, _)| !node_taken[*ni]) {
                if n.feature.is_empty() {
                    continue;
                }
                let dist = cosine_distance(&d.feature, &n.feature);
                if dist < p.thresholds.tau_vis {
                    by_feature.push((dist, di, ni));
                }
            }
        }
        by_feature.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (_, di, ni) in by_feature {
            if !det_taken[di] && !node_taken[ni] {
                det_taken[di] = true;
                node_taken[ni] = true;
                merges.push((di, ni));
            }
        }

        for (di, ni) in merges {
            let d = &dets[vi][di];
            current[ni].insert(
                vid.clone(),
                Grounding { mask: d.mask.clone(), centroid: d.centroid, area_px: d.area_px },
            );
            let node = &mut g.nodes[ni];
            node.track.target = Some(d.source);
            node.track.drift.remove(vid);
        }
        for (ni, t) in tracked.iter().enumerate() {
            if node_taken[ni] {
                continue;
            }
            if let Some(Some(m)) = t.masks.get(vid) {
                if let Some(gr) = Grounding::from_mask(m.clone()) {
                    current[ni].insert(vid.clone(), gr);
                }
            }
        }
        leftovers[vi] = (0..dets[vi].len()).filter(|&di| !det_taken[di]).collect();
    }

    for (n, cur) in g.nodes.iter_mut().zip(current) {
        if cur.is_empty() {
            n.visible = false;
        } else {
            n.visible = true;
            n.groundings = cur;
            n.last_seen_step = g.step;
        }
    }

    if leftovers.iter().any(|l| !l.is_empty()) {
        let sub: Vec<Vec<Detection>> = leftovers
            .iter()
            .enumerate()
            .map(|(vi, idx)| idx.iter().map(|&di| dets[vi][di].clone()).collect())
            .collect();
        let anchors: Vec<AnchorPoints> = g
            .nodes
            .iter()
            .filter(|n| n.visible)
            .map(|n| raw.views.iter().map(|v| n.groundings.get(&v.view_id).map(|gr| gr.centroid)).collect())
            .collect();
        let assoc = associate(&sub, p.thresholds, &anchors);
        for group in &assoc.groups {
            add_node(&mut g, &sub, group);
        }
    }

    refresh_edges(&mut g, Some(prev), raw, p.cameras);
    g
}

/// Recompute edges: relations induced from the current frame, in/on memory
/// for nodes that dropped out of view, in edges inferred for objects that
/// vanished where the gripper released them, and the holding edge.
fn refresh_edges(g: &mut SemanticGraph, prev: Option<&SemanticGraph>, raw: &RawObservation, cameras: &[CameraSpec]) {
    let observed = induce_relations(&g.nodes, &g.views);
    let mut rels: BTreeSet<(NodeId, NodeId, Relation)> = observed.clone();
    let arm = g.arm();
    let held_node = raw
        .proprio
        .holding
        .and_then(|obj| g.nodes.iter().find(|n| n.track.target == Some(obj) && n.class_name != "arm"))
        .map(|n| n.node_id);
    if let (Some(arm), Some(h)) = (arm, held_node) {
        rels.insert((arm, h, Relation::Holding));
    }
    let observed_with_holding = rels.clone();

    if let Some(prev) = prev {
        let has_parent = |rels: &BTreeSet<(NodeId, NodeId, Relation)>, a: NodeId| {
            rels.iter().any(|r| r.0 == a && matches!(r.2, Relation::In | Relation::On))
        };
        for e in &prev.edges {
            if !matches!(e.relation, Relation::In | Relation::On) {
                continue;
            }
            let src_hidden = g.node(e.src).is_some_and(|n| !n.visible);
            if src_hidden && g.node(e.dst).is_some() && Some(e.src) != held_node && !has_parent(&rels, e.src) {
                rels.insert((e.src, e.dst, e.relation));
            }
        }
        // Released out of sight: it went into whatever container the
        // gripper was over.
        if let Some(was_held) = prev.holding() {
            let vanished = g.node(was_held).is_some_and(|n| !n.visible);
            if vanished && held_node.is_none() && !has_parent(&rels, was_held) {
                if let Some(c) = container_at(g, was_held, raw, cameras) {
                    rels.insert((was_held, c, Relation::In));
                }
            }
        }
    }

    let since = |key: &(NodeId, NodeId, Relation)| {
        prev.and_then(|p| p.edges.iter().find(|e| (e.src, e.dst, e.relation) == *key)).map(|e| e.since_step)
    };
    let step = g.step;
    g.edges = rels
        .iter()
        .map(|k| GraphEdge { src: k.0, dst: k.1, relation: k.2, since_step: since(k).unwrap_or(step) })
        .collect();
    g.observed = observed_with_holding
        .iter()
        .map(|k| GraphEdge { src: k.0, dst: k.1, relation: k.2, since_step: step })
        .collect();
}

/// Visible container node whose first-view grounding is closest to where
/// the gripper last released.
fn container_at(g: &SemanticGraph, exclude: NodeId, raw: &RawObservation, cameras: &[CameraSpec]) -> Option<NodeId> {
    let mut best: Option<(f64, NodeId)> = None;
    for cam in cameras {
        let (px, py) = cam.project(raw.proprio.gripper_pos);
        for n in g.nodes.iter().filter(|n| n.visible && n.node_id != exclude) {
            if !class_catalog(&n.class_name).container {
                continue;
            }
            let Some(gr) = n.groundings.get(&cam.view_id) else { continue };
            let d = ((gr.centroid.0 - px).powi(2) + (gr.centroid.1 - py).powi(2)).sqrt();
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && n.node_id < bid)) {
                best = Some((d, n.node_id));
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(_, id)| id)
}
