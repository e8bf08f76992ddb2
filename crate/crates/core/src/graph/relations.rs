//! Mask-based relation induction, fused across views.

use std::collections::{BTreeMap, BTreeSet};

use crate::bitmap::Mask;
use crate::scene::Relation;

use super::{GraphNode, NodeId, ViewInfo};

/// Centroid distance over image diagonal below which two nodes are near.
pub const NEAR_RATIO: f64 = 0.12;
/// Fraction of A that must fall inside B for `in(A, B)`.
pub const CONTAINMENT_RATIO: f64 = 0.85;
pub const DILATION_PX: i32 = 2;
/// Columns of boundary contact required for `on(A, B)`.
pub const MIN_CONTACT_PX: usize = 5;

struct Shape<'a> {
    id: NodeId,
    mask: &'a Mask,
    centroid: (f64, f64),
    count: u64,
    filled_count: u64,
    dilated: Mask,
}

fn contains(a: &Shape<'_>, b: &Shape<'_>) -> bool {
    a.count > 0
        && a.count < b.filled_count
        && a.mask.intersection_count(&b.dilated) as f64 / a.count as f64 >= CONTAINMENT_RATIO
}

/// Lowest row of each column of `m`.
fn bottom_profile(m: &Mask) -> BTreeMap<i32, i32> {
    let mut out = BTreeMap::new();
    for (x, y) in m.pixels() {
        let e = out.entry(x).or_insert(y);
        *e = (*e).max(y);
    }
    out
}

fn top_profile(m: &Mask) -> BTreeMap<i32, i32> {
    let mut out = BTreeMap::new();
    for (x, y) in m.pixels() {
        let e = out.entry(x).or_insert(y);
        *e = (*e).min(y);
    }
    out
}

/// A rests on B: A's lower boundary sits directly on B's upper boundary over
/// enough columns, within the bottom third of A, and A is higher in the
/// image.
fn supports(a: &Shape<'_>, b: &Shape<'_>) -> bool {
    if a.centroid.1 >= b.centroid.1 {
        return false;
    }
    let Some((_, ay0, _, ay1)) = a.mask.bbox() else { return false };
    let band_start = ay0 + 2 * (ay1 - ay0 + 1) / 3;
    let a_bot = bottom_profile(a.mask);
    let b_top = top_profile(b.mask);
    let contact = a_bot
        .iter()
        .filter(|(x, &ab)| ab >= band_start && b_top.get(x).is_some_and(|&bt| (1..=2).contains(&(bt - ab))))
        .count();
    contact >= MIN_CONTACT_PX
}

/// Induce in/on/near among the visible nodes. In and on must hold in every
/// view where both nodes are grounded; near needs one view. Each node keeps
/// at most one in/on parent (the smallest candidate).
pub fn induce_relations(nodes: &[GraphNode], views: &[ViewInfo]) -> BTreeSet<(NodeId, NodeId, Relation)> {
    let visible: Vec<&GraphNode> = nodes.iter().filter(|n| n.visible).collect();
    // (a, b, relation) -> (views agreeing, views where both are grounded)
    let mut votes: BTreeMap<(NodeId, NodeId, Relation), (usize, usize)> = BTreeMap::new();
    let mut near = BTreeSet::new();
    let mut parent_area: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for view in views {
        let shapes: Vec<Shape<'_>> = visible
            .iter()
            .filter_map(|n| {
                let g = n.groundings.get(&view.view_id)?;
                let filled = g.mask.fill_holes();
                Some(Shape {
                    id: n.node_id,
                    mask: &g.mask,
                    centroid: g.centroid,
                    count: g.area_px,
                    filled_count: filled.count(),
                    dilated: filled.dilate(DILATION_PX),
                })
            })
            .collect();
        let diag = view.diagonal();
        for a in &shapes {
            for b in &shapes {
                if a.id == b.id {
                    continue;
                }
                if a.id < b.id {
                    let d = ((a.centroid.0 - b.centroid.0).powi(2) + (a.centroid.1 - b.centroid.1).powi(2)).sqrt();
                    if d / diag < NEAR_RATIO {
                        near.insert((a.id, b.id, Relation::Near));
                    }
                }
                let a_in_b = contains(a, b);
                let b_in_a = contains(b, a);
                let a_on_b = !a_in_b && !b_in_a && supports(a, b);
                for (rel, holds) in [(Relation::In, a_in_b), (Relation::On, a_on_b)] {
                    let e = votes.entry((a.id, b.id, rel)).or_insert((0, 0));
                    e.1 += 1;
                    if holds {
                        e.0 += 1;
                    }
                }
                let area = parent_area.entry((a.id, b.id)).or_insert(0);
                *area = (*area).max(b.filled_count);
            }
        }
    }
    let mut best: BTreeMap<NodeId, (u64, NodeId, Relation)> = BTreeMap::new();
    for ((a, b, rel), (yes, seen)) in votes {
        if yes > 0 && yes == seen {
            let area = parent_area[&(a, b)];
            let cand = (area, b, rel);
            best.entry(a).and_modify(|cur| *cur = (*cur).min(cand)).or_insert(cand);
        }
    }
    let mut out = near;
    for (a, (_, b, rel)) in best {
        out.insert((a, b, rel));
    }
    out
}
