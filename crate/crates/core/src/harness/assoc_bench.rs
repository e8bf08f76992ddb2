//! Association quality on random scenes: agreement with ground-truth
//! identity and with the exact minimum-cost pairwise matching.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::{SceneConfig, TaskId};
use crate::graph::{associate, AssocThresholds, DetRef};
use crate::perception::{cosine_distance, identify_relevant, segment, Detection, NoiseConfig, TaskSpec};
use crate::rng::SimRng;
use crate::scene::{init_world, render_views};

use super::HarnessError;

/// Exact minimum-cost partial matching between rows and columns. Each
/// matched pair costs `cost[i][j]`, each unmatched row or column costs
/// `unmatched`. Exhaustive over column subsets; meant for small inputs.
pub fn min_cost_matching(cost: &[Vec<f64>], unmatched: f64) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    assert!(cols <= 16, "min_cost_matching is exponential in the column count");
    let full = 1usize << cols;
    // best[i][mask]: cheapest way to place rows i.. given used columns mask,
    // counting unmatched columns at the end.
    let mut best = vec![vec![f64::INFINITY; full]; rows + 1];
    for mask in 0..full {
        best[rows][mask] = unmatched * (cols - mask.count_ones() as usize) as f64;
    }
    for i in (0..rows).rev() {
        for mask in 0..full {
            let mut b = unmatched + best[i + 1][mask];
            for j in 0..cols {
                if mask & (1 << j) == 0 {
                    b = b.min(cost[i][j] + best[i + 1][mask | (1 << j)]);
                }
            }
            best[i][mask] = b;
        }
    }
    let mut out = Vec::new();
    let mut mask = 0usize;
    for i in 0..rows {
        let target = best[i][mask];
        if unmatched + best[i + 1][mask] == target {
            continue;
        }
        let j = (0..cols)
            .find(|&j| mask & (1 << j) == 0 && cost[i][j] + best[i + 1][mask | (1 << j)] == target)
            .expect("a choice attains the optimum");
        out.push((i, j));
        mask |= 1 << j;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocBenchReport {
    pub scenes: u64,
    pub sigma: f64,
    /// Scenes whose groups are exactly the ground-truth identities.
    pub identity_agree: u64,
    /// Scenes whose cross-view pairs equal the minimum-cost matching.
    pub oracle_agree: u64,
}

impl AssocBenchReport {
    pub fn identity_pct(&self) -> f64 {
        100.0 * self.identity_agree as f64 / self.scenes.max(1) as f64
    }

    pub fn oracle_pct(&self) -> f64 {
        100.0 * self.oracle_agree as f64 / self.scenes.max(1) as f64
    }
}

/// Relevant detections of the scene drawn for index `k`.
pub fn bench_scene(k: u64, sigma: f64) -> Result<Vec<Vec<Detection>>, HarnessError> {
    let task = [TaskId::SwapCups, TaskId::PnpTwice, TaskId::PlaceAndStack][(k % 3) as usize];
    let cfg = SceneConfig::perfect(task).with_distractors((k % 9) as u32);
    let world = init_world(&cfg, k).map_err(|source| HarnessError::Scene { seed: k, source })?;
    let raw = render_views(&world, &cfg.cameras);
    let noise = NoiseConfig { feature_sigma: sigma, ..NoiseConfig::default() };
    let spec = TaskSpec::for_task(cfg.setup());
    let mut rng = SimRng::substream(k, "assoc-bench");
    Ok(segment(&raw, &noise, &mut rng).iter().map(|d| identify_relevant(d, &spec)).collect())
}

fn pairs_of(groups: &[Vec<DetRef>]) -> BTreeSet<(DetRef, DetRef)> {
    let mut out = BTreeSet::new();
    for g in groups {
        for (x, &a) in g.iter().enumerate() {
            for &b in &g[x + 1..] {
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

pub fn assoc_bench(scenes: u64, sigma: f64) -> Result<AssocBenchReport, HarnessError> {
    let thr = AssocThresholds::default();
    let mut report = AssocBenchReport { scenes, sigma, identity_agree: 0, oracle_agree: 0 };
    for k in 0..scenes {
        let dets = bench_scene(k, sigma)?;
        let assoc = associate(&dets, &thr, &[]);
        let got = pairs_of(&assoc.groups);

        let mut truth: BTreeMap<_, BTreeSet<DetRef>> = BTreeMap::new();
        for (v, view) in dets.iter().enumerate() {
            for (i, d) in view.iter().enumerate() {
                truth.entry(d.source).or_default().insert((v, i));
            }
        }
        let truth: BTreeSet<BTreeSet<DetRef>> = truth.into_values().collect();
        let found: BTreeSet<BTreeSet<DetRef>> = assoc.groups.iter().map(|g| g.iter().copied().collect()).collect();
        let identity = found == truth;
        report.identity_agree += identity as u64;

        let mut oracle = BTreeSet::new();
        for va in 0..dets.len() {
            for vb in va + 1..dets.len() {
                let cost: Vec<Vec<f64>> = dets[va]
                    .iter()
                    .map(|a| dets[vb].iter().map(|b| cosine_distance(&a.feature, &b.feature)).collect())
                    .collect();
                for (i, j) in min_cost_matching(&cost, thr.tau_vis / 2.0) {
                    oracle.insert(((va, i), (vb, j)));
                }
            }
        }
        report.oracle_agree += (got == oracle) as u64;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_prefers_cheap_pairs() {
        let cost = vec![vec![0.1, 0.9], vec![0.05, 0.2]];
        assert_eq!(min_cost_matching(&cost, 1.0), vec![(0, 0), (1, 1)]);
        // Unmatching is cheaper than a bad pair.
        assert_eq!(min_cost_matching(&[vec![0.9]], 0.2), vec![]);
        assert_eq!(min_cost_matching(&[], 0.2), vec![]);
        assert_eq!(min_cost_matching(&[vec![0.1, 0.01, 0.5]], 0.3), vec![(0, 1)]);
    }

    #[test]
    fn small_bench_runs() {
        let r = assoc_bench(6, 0.0).unwrap();
        assert_eq!(r.identity_agree, 6);
    }
}
