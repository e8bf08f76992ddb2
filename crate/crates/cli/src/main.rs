//! `tabletop`: run episodes and suites, replay logs, check plan files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};

use tabletop_core::harness::{assoc_bench, replay, write_log, Cell};
use tabletop_core::{parse_program, run_episode, run_suite, HarnessError, PlannerMode, SceneConfig, VisionMode};

#[derive(Parser)]
#[command(name = "tabletop", version, about = "Deterministic tabletop manipulation episodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its footer as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "code")]
        planner: PlannerMode,
        #[arg(long, default_value = "masked")]
        vision: VisionMode,
        /// Write the JSON-lines episode log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run seeds 0..N over a grid and print an aligned table.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
        /// Axes to sweep, comma separated: `planner`, `vision`,
        /// `distractors`, each optionally with values, as in
        /// `planner=code|markovian,distractors=0|8`.
        #[arg(long, default_value = "planner")]
        grid: String,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Re-run a logged episode and check it reproduces exactly.
    Replay { log: PathBuf },
    /// Parse and check a policy program.
    ValidatePlan { file: PathBuf },
    /// Compare cross-view association with ground truth and the
    /// minimum-cost matching on random scenes.
    AssocBench {
        #[arg(long, default_value_t = 1000)]
        scenes: u64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
    },
}

/// Failure classes, each with its own exit status.
enum Failure {
    Config(anyhow::Error),
    Divergence(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Divergence(e) | Failure::Other(e) => e,
        }
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Config(_) | HarnessError::MissingProgram(_) => Failure::Config(e.into()),
        HarnessError::DivergenceAt { .. } | HarnessError::VersionMismatch { .. } => Failure::Divergence(e.into()),
        other => Failure::Other(other.into()),
    }
}

fn load_config(path: &std::path::Path) -> Result<SceneConfig, Failure> {
    SceneConfig::load(path).map_err(|e| Failure::Config(e.into()))
}

fn parse_list<T: std::str::FromStr<Err = String>>(axis: &str, values: &str) -> anyhow::Result<Vec<T>> {
    values.split('|').map(|v| v.trim().parse::<T>().map_err(|e| anyhow!("grid axis `{axis}`: {e}"))).collect()
}

/// Expand `--grid` into cells. Axes that are not named keep the config's
/// value (code planner, masked vision, configured distractors).
fn parse_grid(spec: &str, cfg: &SceneConfig) -> anyhow::Result<Vec<Cell>> {
    let mut planners = vec![PlannerMode::Code];
    let mut visions = vec![VisionMode::Masked];
    let mut distractors = vec![cfg.distractors];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (axis, values) = match part.split_once('=') {
            Some((a, v)) => (a.trim(), Some(v)),
            None => (part, None),
        };
        match axis {
            "planner" => planners = values.map_or(Ok(PlannerMode::ALL.to_vec()), |v| parse_list(axis, v))?,
            "vision" => visions = values.map_or(Ok(vec![VisionMode::Masked, VisionMode::Raw]), |v| parse_list(axis, v))?,
            "distractors" => {
                distractors = match values {
                    None => vec![0, 2, 4, 8],
                    Some(v) => v
                        .split('|')
                        .map(|d| d.trim().parse::<u32>().with_context(|| format!("grid axis `distractors`: bad count `{d}`")))
                        .collect::<anyhow::Result<_>>()?,
                }
            }
            other => bail!("unknown grid axis `{other}` (expected planner, vision, distractors)"),
        }
    }
    let mut cells = Vec::new();
    for &planner in &planners {
        for &vision in &visions {
            for &d in &distractors {
                cells.push(Cell { planner, vision, distractors: d });
            }
        }
    }
    Ok(cells)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, seed, planner, vision, log } => {
            let cfg = load_config(&config)?;
            let ep = run_episode(&cfg, seed, planner, vision).map_err(harness_failure)?;
            if let Some(path) = log {
                write_log(&ep, &path).map_err(harness_failure)?;
            }
            println!("{}", serde_json::to_string_pretty(&ep.footer).expect("footer serializes"));
        }
        Command::Suite { config, seeds, grid, json } => {
            let cfg = load_config(&config)?;
            let cells = parse_grid(&grid, &cfg).map_err(Failure::Config)?;
            let report = run_suite(&cfg, seeds, &cells).map_err(harness_failure)?;
            if let Some(path) = json {
                std::fs::write(&path, report.to_json())
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(Failure::Other)?;
            }
            print!("{}", report.to_text());
        }
        Command::Replay { log } => {
            let n = replay(&log).map_err(harness_failure)?;
            println!("ok: {n} records reproduced");
        }
        Command::ValidatePlan { file } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))
                .map_err(Failure::Config)?;
            let program = parse_program(&text).map_err(|e| Failure::Config(anyhow!("{}:{e}", file.display())))?;
            println!("ok: policy `{}`, {} bindings, {} steps", program.name, program.bindings.len(), program.steps().len());
        }
        Command::AssocBench { scenes, sigma } => {
            if !(sigma >= 0.0) {
                return Err(Failure::Config(anyhow!("--sigma must be non-negative")));
            }
            let r = assoc_bench(scenes, sigma).map_err(harness_failure)?;
            let out = serde_json::json!({
                "scenes": r.scenes,
                "sigma": r.sigma,
                "identity_agree": r.identity_agree,
                "identity_pct": r.identity_pct(),
                "oracle_agree": r.oracle_agree,
                "oracle_pct": r.oracle_pct(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
