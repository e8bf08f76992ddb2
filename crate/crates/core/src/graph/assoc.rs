//! Cross-view association: mutual-nearest matching on appearance, then
//! distance signatures relative to matched anchors for the leftovers.

use serde::{Deserialize, Serialize};

use crate::perception::{cosine_distance, Detection};

use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocThresholds {
    pub tau_vis: f64,
    pub tau_geo: f64,
    pub margin_geo: f64,
}

impl Default for AssocThresholds {
    fn default() -> Self {
        Self { tau_vis: 0.15, tau_geo: 0.10, margin_geo: 0.05 }
    }
}

impl AssocThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_vis > 0.0 && self.tau_vis < 2.0) {
            return Err(format!("thresholds.tau_vis must be in (0, 2), got {}", self.tau_vis));
        }
        if !(self.tau_geo > 0.0) || !(self.margin_geo >= 0.0) {
            return Err("thresholds.tau_geo > 0 and margin_geo >= 0 required".into());
        }
        Ok(())
    }
}

/// `(view index, detection index)`.
pub type DetRef = (usize, usize);

/// Centroid of one anchor in each view, `None` where it is not seen.
pub type AnchorPoints = Vec<Option<(f64, f64)>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// Every detection exactly once; each group holds at most one detection
    /// per view. Sorted by first member.
    pub groups: Vec<Vec<DetRef>>,
    pub semantic_pairs: usize,
    pub geometric_pairs: usize,
    /// Detections left unmatched by the semantic stage.
    pub fell_through: usize,
    /// The geometric stage was needed but some view had no anchors.
    pub no_anchors: bool,
}

fn nearest<I: Iterator<Item = (usize, f64)>>(it: I) -> Option<(usize, f64)> {
    it.fold(None, |best: Option<(usize, f64)>, (j, d)| match best {
        Some((_, bd)) if bd <= d => best,
        _ => Some((j, d)),
    })
}

/// Mutual-nearest pairs on cosine distance for every pair of views.
pub fn associate_semantic(dets: &[Vec<Detection>], tau_vis: f64) -> Vec<(DetRef, DetRef)> {
    let mut pairs = Vec::new();
    for vi in 0..dets.len() {
        for vj in vi + 1..dets.len() {
            let (a, b) = (&dets[vi], &dets[vj]);
            let d: Vec<Vec<f64>> =
                a.iter().map(|x| b.iter().map(|y| cosine_distance(&x.feature, &y.feature)).collect()).collect();
            for (i, row) in d.iter().enumerate() {
                let Some((j, dist)) = nearest(row.iter().copied().enumerate()) else { continue };
                let back = nearest(d.iter().map(|r| r[j]).enumerate()).map(|(k, _)| k);
                if back == Some(i) && dist < tau_vis {
                    pairs.push(((vi, i), (vj, j)));
                }
            }
        }
    }
    pairs
}

/// Distances from `c` to every anchor present in the view, divided by the
/// largest of them. Absent anchors stay `None`.
pub fn distance_signature(
    c: (f64, f64),
    anchors: &[Option<(f64, f64)>],
    view_id: &str,
) -> Result<Vec<Option<f64>>, GraphError> {
    let raw: Vec<Option<f64>> =
        anchors.iter().map(|a| a.map(|(x, y)| ((c.0 - x).powi(2) + (c.1 - y).powi(2)).sqrt())).collect();
    if raw.iter().all(Option::is_none) {
        return Err(GraphError::NoAnchors(view_id.to_string()));
    }
    let max = raw.iter().flatten().copied().fold(0.0, f64::max);
    Ok(raw.into_iter().map(|d| d.map(|d| if max > 0.0 { d / max } else { 0.0 })).collect())
}

/// L2 distance over the anchors present in both signatures, divided by
/// `sqrt(shared / total)` so sparse overlap reads as less certain.
pub fn signature_distance(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let total = a.len().max(b.len());
    let mut shared = 0usize;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            shared += 1;
            acc += (x - y).powi(2);
        }
    }
    if shared == 0 {
        return None;
    }
    Some(acc.sqrt() / (shared as f64 / total as f64).sqrt())
}

/// Index of the smallest entry and the gap to the runner-up (infinite
/// when there is none). Ties go to the smaller index.
fn best_with_gap(row: &[f64]) -> Option<(usize, f64, f64)> {
    let (j, best) = nearest(row.iter().copied().enumerate().filter(|(_, d)| d.is_finite()))?;
    let second = row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &d)| d).fold(f64::INFINITY, f64::min);
    Some((j, best, second - best))
}

/// Match leftover detections across views by comparing their distance
/// signatures. A pair is accepted when each side is the other's best
/// candidate, the distance is below `tau_geo`, and both runner-ups trail
/// by at least `margin_geo`. Only same-class detections are compared.
pub fn associate_geometric(
    dets: &[Vec<Detection>],
    unmatched: &[Vec<usize>],
    anchors: &[AnchorPoints],
    thr: &AssocThresholds,
) -> Result<Vec<(DetRef, DetRef)>, GraphError> {
    let mut sigs: Vec<Vec<Vec<Option<f64>>>> = Vec::with_capacity(dets.len());
    for (v, idx) in unmatched.iter().enumerate() {
        let points: Vec<Option<(f64, f64)>> = anchors.iter().map(|a| a.get(v).copied().flatten()).collect();
        let mut view_sigs = Vec::with_capacity(idx.len());
        for &i in idx {
            let d = &dets[v][i];
            view_sigs.push(distance_signature(d.centroid, &points, &d.view_id)?);
        }
        sigs.push(view_sigs);
    }
    let mut pairs = Vec::new();
    for vi in 0..unmatched.len() {
        for vj in vi + 1..unmatched.len() {
            let (ui, uj) = (&unmatched[vi], &unmatched[vj]);
            if ui.is_empty() || uj.is_empty() {
                continue;
            }
            let cost: Vec<Vec<f64>> = ui
                .iter()
                .enumerate()
                .map(|(a, &i)| {
                    uj.iter()
                        .enumerate()
                        .map(|(b, &j)| {
                            if dets[vi][i].class_name != dets[vj][j].class_name {
                                return f64::INFINITY;
                            }
                            signature_distance(&sigs[vi][a], &sigs[vj][b]).unwrap_or(f64::INFINITY)
                        })
                        .collect()
                })
                .collect();
            for (a, row) in cost.iter().enumerate() {
                let Some((b, best, gap)) = best_with_gap(row) else { continue };
                let col: Vec<f64> = cost.iter().map(|r| r[b]).collect();
                let Some((back, _, back_gap)) = best_with_gap(&col) else { continue };
                if back == a && best < thr.tau_geo && gap >= thr.margin_geo && back_gap >= thr.margin_geo {
                    pairs.push(((vi, ui[a]), (vj, uj[b])));
                }
            }
        }
    }
    Ok(pairs)
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let n = parent[c];
        parent[c] = r;
        c = n;
    }
    r
}

/// Union pairs into groups. A group that would hold two detections of the
/// same view is split back into singletons.
fn group(dets: &[Vec<Detection>], pairs: &[(DetRef, DetRef)]) -> Vec<Vec<DetRef>> {
    let offsets: Vec<usize> = dets
        .iter()
        .scan(0, |acc, v| {
            let o = *acc;
            *acc += v.len();
            Some(o)
        })
        .collect();
    let refs: Vec<DetRef> = dets.iter().enumerate().flat_map(|(v, ds)| (0..ds.len()).map(move |i| (v, i))).collect();
    let flat = |r: DetRef| offsets[r.0] + r.1;
    let mut parent: Vec<usize> = (0..refs.len()).collect();
    for &(a, b) in pairs {
        let (ra, rb) = (find(&mut parent, flat(a)), find(&mut parent, flat(b)));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<DetRef>> = Default::default();
    for (k, &r) in refs.iter().enumerate() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, g) in groups {
        let mut views: Vec<usize> = g.iter().map(|r| r.0).collect();
        views.sort_unstable();
        views.dedup();
        if views.len() == g.len() {
            out.push(g);
        } else {
            out.extend(g.into_iter().map(|r| vec![r]));
        }
    }
    out.sort();
    out
}

/// Full association: semantic stage, then geometric matching of the
/// leftovers against the semantic anchors plus `extra_anchors`.
pub fn associate(dets: &[Vec<Detection>], thr: &AssocThresholds, extra_anchors: &[AnchorPoints]) -> Association {
    let semantic = associate_semantic(dets, thr.tau_vis);
    let sem_groups = group(dets, &semantic);
    let mut unmatched: Vec<Vec<usize>> = vec![Vec::new(); dets.len()];
    let mut anchors: Vec<AnchorPoints> = extra_anchors.to_vec();
    for g in &sem_groups {
        if g.len() == 1 {
            unmatched[g[0].0].push(g[0].1);
        } else {
            let mut pts = vec![None; dets.len()];
            for &(v, i) in g {
                pts[v] = Some(dets[v][i].centroid);
            }
            anchors.push(pts);
        }
    }
    let fell_through = unmatched.iter().map(Vec::len).sum();
    let views_with_leftovers = unmatched.iter().filter(|u| !u.is_empty()).count();
    let mut result = Association {
        semantic_pairs: semantic.len(),
        fell_through,
        ..Association::default()
    };
    let mut pairs = semantic;
    if views_with_leftovers >= 2 {
        match associate_geometric(dets, &unmatched, &anchors, thr) {
            Ok(geo) => {
                result.geometric_pairs = geo.len();
                pairs.extend(geo);
            }
            Err(GraphError::NoAnchors(_)) => result.no_anchors = true,
            Err(e) => unreachable!("geometric association only fails for lack of anchors: {e}"),
        }
    }
    result.groups = group(dets, &pairs);
    result
}
