//! Clutter-free observations: per-view retention masks built from the
//! subtask-relevant nodes, and the subtask language cue.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bitmap::Mask;
use crate::graph::{NodeId, SemanticGraph};
use crate::scene::{RawObservation, BACKGROUND};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown view `{0}`")]
    UnknownView(String),
    #[error("unresolved hole `{{{0}}}` in subtask template")]
    UnresolvedHole(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedView {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    #[serde(skip)]
    pub labels: Vec<u32>,
    /// `None` for an unmasked observation.
    pub retention: Option<Mask>,
}

impl MaskedView {
    pub fn label(&self, x: i32, y: i32) -> u32 {
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            BACKGROUND
        } else {
            self.labels[(y as u32 * self.width + x as u32) as usize]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedObservation {
    pub views: Vec<MaskedView>,
    pub subtask_cue: String,
    pub relevant_ids: BTreeSet<NodeId>,
}

impl MaskedObservation {
    /// The raw observation passed through untouched.
    pub fn unmasked(raw: &RawObservation, relevant: &BTreeSet<NodeId>, cue: &str) -> Self {
        Self {
            views: raw
                .views
                .iter()
                .map(|v| MaskedView {
                    view_id: v.view_id.clone(),
                    width: v.width,
                    height: v.height,
                    labels: v.labels.clone(),
                    retention: None,
                })
                .collect(),
            subtask_cue: cue.to_string(),
            relevant_ids: relevant.clone(),
        }
    }

    /// Distinct non-background labels with at least one pixel, ascending.
    pub fn visible_labels(&self) -> Vec<u32> {
        let mut set = BTreeSet::new();
        for v in &self.views {
            set.extend(v.labels.iter().copied().filter(|&l| l != BACKGROUND));
        }
        set.into_iter().collect()
    }
}

/// Union of the current masks of `relevant` in one view. Nodes that are not
/// visible, or have no grounding in the view, add nothing.
pub fn retention_mask(graph: &SemanticGraph, relevant: &BTreeSet<NodeId>, view_id: &str) -> Result<Mask, PromptError> {
    let view = graph.view(view_id).ok_or_else(|| PromptError::UnknownView(view_id.to_string()))?;
    let mut m = Mask::empty();
    for &id in relevant {
        let n = graph.node(id).ok_or(PromptError::UnknownNode(id))?;
        if !n.visible {
            continue;
        }
        if let Some(g) = n.groundings.get(view_id) {
            m = m.union(&g.mask);
        }
    }
    Ok(m.clip(view.width, view.height))
}

fn apply_retention(labels: &[u32], width: u32, keep: &Mask) -> Vec<u32> {
    let mut out = vec![BACKGROUND; labels.len()];
    for (x, y) in keep.pixels() {
        let i = (y as u32 * width + x as u32) as usize;
        out[i] = labels[i];
    }
    out
}

/// Black out every pixel outside the retention mask of each view.
pub fn clutter_free_obs(
    raw: &RawObservation,
    graph: &SemanticGraph,
    relevant: &BTreeSet<NodeId>,
    cue: &str,
) -> Result<MaskedObservation, PromptError> {
    let mut views = Vec::with_capacity(raw.views.len());
    for v in &raw.views {
        let keep = retention_mask(graph, relevant, &v.view_id)?;
        views.push(MaskedView {
            view_id: v.view_id.clone(),
            width: v.width,
            height: v.height,
            labels: apply_retention(&v.labels, v.width, &keep),
            retention: Some(keep),
        });
    }
    Ok(MaskedObservation { views, subtask_cue: cue.to_string(), relevant_ids: relevant.clone() })
}

/// Mask an already masked observation again (a no-op for the same set).
pub fn remask(obs: &MaskedObservation, graph: &SemanticGraph, relevant: &BTreeSet<NodeId>) -> Result<MaskedObservation, PromptError> {
    let mut views = Vec::with_capacity(obs.views.len());
    for v in &obs.views {
        let keep = retention_mask(graph, relevant, &v.view_id)?;
        views.push(MaskedView { labels: apply_retention(&v.labels, v.width, &keep), retention: Some(keep), ..v.clone() });
    }
    Ok(MaskedObservation { views, subtask_cue: obs.subtask_cue.clone(), relevant_ids: relevant.clone() })
}

/// Substitute `{var}` holes with the bound names.
pub fn format_subtask_cue(template: &str, env: &BTreeMap<String, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| PromptError::UnresolvedHole(after.to_string()))?;
        let var = &after[..close];
        let value = env.get(var).ok_or_else(|| PromptError::UnresolvedHole(var.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(PromptError::UnresolvedHole(rest.to_string()));
    }
    out.push_str(rest);
    Ok(out)
}
