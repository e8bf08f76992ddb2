//! Multi-seed evaluation over a grid of planner, vision, and clutter
//! settings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CupColor, SceneConfig, TaskId};
use crate::scene::{MILESTONE_DROP_CUBE, MILESTONE_PNP_ONCE, MILESTONE_STAGE_CUP};

use super::{run_episode, EpisodeLog, HarnessError, PlannerMode, VisionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub planner: PlannerMode,
    pub vision: VisionMode,
    pub distractors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub task: TaskId,
    pub first_cup: CupColor,
    pub planner: PlannerMode,
    pub vision: VisionMode,
    pub distractors: u32,
    pub seeds: u64,
    pub success_pct: f64,
    pub milestone_pct: BTreeMap<String, f64>,
    pub latency_median_ms: f64,
    pub latency_p95_ms: f64,
    pub mean_chunks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config_hash: String,
    pub seeds: u64,
    pub cells: Vec<CellReport>,
}

fn milestone_names(task: TaskId) -> &'static [&'static str] {
    match task {
        TaskId::SwapCups => &[MILESTONE_STAGE_CUP],
        TaskId::PnpTwice => &[MILESTONE_PNP_ONCE],
        TaskId::PlaceAndStack => &[MILESTONE_DROP_CUBE],
        TaskId::Custom => &[],
    }
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0,
    }
}

/// Aggregate one cell's episode logs.
pub fn summarize(cfg: &SceneConfig, cell: Cell, logs: &[EpisodeLog]) -> CellReport {
    let n = logs.len().max(1) as f64;
    let pct = |k: usize| 100.0 * k as f64 / n;
    let success = logs.iter().filter(|l| l.footer.success).count();
    let milestone_pct = milestone_names(cfg.task)
        .iter()
        .map(|m| (m.to_string(), pct(logs.iter().filter(|l| l.footer.milestones.iter().any(|x| x == m)).count())))
        .collect();
    let mut lat: Vec<u64> = logs.iter().flat_map(|l| l.records.iter().map(|r| r.latency_ns)).collect();
    lat.sort_unstable();
    CellReport {
        task: cfg.task,
        first_cup: cfg.first_cup,
        planner: cell.planner,
        vision: cell.vision,
        distractors: cell.distractors,
        seeds: logs.len() as u64,
        success_pct: pct(success),
        milestone_pct,
        latency_median_ms: median(&lat) / 1e6,
        latency_p95_ms: percentile(&lat, 0.95) as f64 / 1e6,
        mean_chunks: logs.iter().map(|l| l.footer.chunks as f64).sum::<f64>() / n,
    }
}

/// Run seeds `0..n_seeds` for every cell. Episodes run in parallel; the
/// report depends only on the config, seeds, and grid.
pub fn run_suite(cfg: &SceneConfig, n_seeds: u64, grid: &[Cell]) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    let mut cells = Vec::with_capacity(grid.len());
    for &cell in grid {
        let cell_cfg = cfg.clone().with_distractors(cell.distractors);
        let logs = (0..n_seeds)
            .into_par_iter()
            .map(|seed| run_episode(&cell_cfg, seed, cell.planner, cell.vision))
            .collect::<Result<Vec<_>, _>>()?;
        cells.push(summarize(&cell_cfg, cell, &logs));
    }
    Ok(SuiteReport { config_hash: cfg.hash_hex(), seeds: n_seeds, cells })
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one row per cell.
    pub fn to_text(&self) -> String {
        let mut milestones: Vec<&str> = Vec::new();
        for c in &self.cells {
            for m in c.milestone_pct.keys() {
                if !milestones.contains(&m.as_str()) {
                    milestones.push(m);
                }
            }
        }
        let mut header = vec!["task".to_string(), "planner".into(), "vision".into(), "d".into(), "success%".into()];
        header.extend(milestones.iter().map(|m| format!("{m}%")));
        header.extend(["lat_med_ms".to_string(), "lat_p95_ms".into(), "chunks".into()]);
        let mut rows = vec![header];
        for c in &self.cells {
            let mut row = vec![
                c.task.as_str().to_string(),
                c.planner.as_str().to_string(),
                c.vision.as_str().to_string(),
                c.distractors.to_string(),
                format!("{:.1}", c.success_pct),
            ];
            row.extend(milestones.iter().map(|m| c.milestone_pct.get(*m).map_or("-".into(), |v| format!("{v:.1}"))));
            row.push(format!("{:.3}", c.latency_median_ms));
            row.push(format!("{:.3}", c.latency_p95_ms));
            row.push(format!("{:.2}", c.mean_chunks));
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (ri, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, s)| if i < 3 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if ri == 0 {
                let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            }
        }
        out
    }
}
