//! JSON-lines episode logs and bit-exact replay.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{CupColor, SceneConfig, TaskId};
use crate::dsl::PlannerOutput;
use crate::executor::ActionChunk;
use crate::graph::SemanticGraph;

use super::{run_traced, HarnessError, PlannerMode, StopReason, VisionMode};

pub const LOG_VERSION: &str = concat!("tabletop-log/1 core-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: String,
    pub config_hash: String,
    pub config: SceneConfig,
    pub seed: u64,
    pub task: TaskId,
    pub first_cup: CupColor,
    pub planner: PlannerMode,
    pub vision: VisionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub index: u32,
    /// World step at which the planner was called.
    pub step: u64,
    /// Graph as the planner left it (including task memory).
    pub graph: SemanticGraph,
    pub planner: PlannerOutput,
    pub error: Option<String>,
    /// Wall-clock planner time plus any injected latency. Not compared on
    /// replay.
    pub latency_ns: u64,
    pub chunk: Option<ActionChunk>,
    /// Milestones reached so far.
    pub milestones: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    pub success: bool,
    pub milestones: Vec<String>,
    pub stop: StopReason,
    pub total_steps: u64,
    pub chunks: u32,
    pub primitives: u32,
    /// Not compared on replay.
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Record(ReplanRecord),
    Footer(LogFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub records: Vec<ReplanRecord>,
    pub footer: LogFooter,
}

impl EpisodeLog {
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.records.len() + 2);
        let ser = |l: &LogLine| serde_json::to_string(l).expect("log lines serialize");
        out.push(ser(&LogLine::Header(self.header.clone())));
        out.extend(self.records.iter().map(|r| ser(&LogLine::Record(r.clone()))));
        out.push(ser(&LogLine::Footer(self.footer.clone())));
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = self.lines().join("\n");
        s.push('\n');
        s
    }
}

pub fn write_log(log: &EpisodeLog, path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    f.write_all(log.to_jsonl().as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

/// Raw log lines; the header is parsed, the rest kept as text so replay can
/// compare them without trusting their contents.
pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<String>), HarnessError> {
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let f = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let lines: Vec<String> = f.lines().collect::<Result<_, _>>().map_err(io)?;
    let first = lines.first().ok_or(HarnessError::BadLog { line: 1, message: "empty log".into() })?;
    let header = match serde_json::from_str::<LogLine>(first) {
        Ok(LogLine::Header(h)) => h,
        Ok(_) => return Err(HarnessError::BadLog { line: 1, message: "first line is not a header".into() }),
        Err(e) => {
            // Report a version mismatch ahead of a schema error when the
            // version field is readable.
            if let Some(v) = serde_json::from_str::<serde_json::Value>(first)
                .ok()
                .and_then(|v| v.get("version").and_then(|s| s.as_str()).map(str::to_string))
            {
                if v != LOG_VERSION {
                    return Err(HarnessError::VersionMismatch { expected: LOG_VERSION.into(), found: v });
                }
            }
            return Err(HarnessError::BadLog { line: 1, message: e.to_string() });
        }
    };
    Ok((header, lines[1..].to_vec()))
}

/// Canonical text of a log line with the wall-clock fields zeroed.
fn comparable(line: &str) -> Option<String> {
    let mut v: serde_json::Value = serde_json::from_str(line).ok()?;
    if let Some(obj) = v.as_object_mut() {
        if obj.contains_key("latency_ns") {
            obj.insert("latency_ns".into(), 0.into());
        }
        if obj.contains_key("wall_time_ms") {
            obj.insert("wall_time_ms".into(), 0.into());
        }
    }
    serde_json::to_string(&v).ok()
}

/// Re-run the logged episode and compare every record. Returns the number
/// of records checked.
pub fn replay(path: &Path) -> Result<usize, HarnessError> {
    let (header, lines) = read_log(path)?;
    if header.version != LOG_VERSION {
        return Err(HarnessError::VersionMismatch { expected: LOG_VERSION.into(), found: header.version });
    }
    if header.config.hash_hex() != header.config_hash {
        return Err(HarnessError::BadLog { line: 1, message: "config hash does not match the embedded config".into() });
    }
    let fresh = run_traced(&header.config, header.seed, header.planner, header.vision, None)?.log;
    if fresh.header != header {
        return Err(HarnessError::DivergenceAt { record: 0, step: 0 });
    }
    let expected: Vec<String> = fresh.lines()[1..].to_vec();
    for (i, want) in expected.iter().enumerate() {
        let step = fresh.records.get(i).map_or(fresh.footer.total_steps, |r| r.step);
        let got = lines.get(i).and_then(|l| comparable(l));
        if got.as_deref() != comparable(want).as_deref() {
            return Err(HarnessError::DivergenceAt { record: i, step });
        }
    }
    if lines.len() > expected.len() && lines[expected.len()..].iter().any(|l| !l.trim().is_empty()) {
        return Err(HarnessError::DivergenceAt { record: expected.len(), step: fresh.footer.total_steps });
    }
    Ok(fresh.records.len())
}
