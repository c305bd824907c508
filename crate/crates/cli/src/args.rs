use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nbtrack_core::EngineConfig;

use crate::error::{CliError, CliResult};

/// Single-object tracking with backward-tracklet neighbor matching, run
/// against a synthetic world.
///
/// Every flag can also be set through an environment variable named
/// `NBTRACK_` plus the flag name in upper snake case (`NBTRACK_TAU=3`).
#[derive(Debug, Parser)]
#[command(name = "nbtrack", version)]
pub struct Cli {
    /// Worker threads for per-sequence work (0 = one per core).
    #[arg(long, global = true, default_value_t = 1, env = "NBTRACK_JOBS")]
    pub jobs: usize,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenes and write them as JSON files.
    Simulate(SimulateArgs),
    /// Run the baseline and the engine; write per-frame boxes and decision logs.
    Track(TrackArgs),
    /// Score tracking runs, compare systems, and run ablations.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario name or path to a TOML scenario file.
    #[arg(long, env = "NBTRACK_SCENARIO")]
    pub scenario: String,
    /// Seeds: `N`, `A..B` (exclusive), or a comma list of either.
    #[arg(long, default_value = "0", env = "NBTRACK_SEEDS")]
    pub seeds: String,
    #[arg(long, env = "NBTRACK_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Scenario name or path to a TOML scenario file.
    #[arg(long, env = "NBTRACK_SCENARIO", conflicts_with_all = ["scene", "mot"])]
    pub scenario: Option<String>,
    /// Scene JSON files written by `simulate`.
    #[arg(long, num_args = 1.., conflicts_with = "mot")]
    pub scene: Vec<PathBuf>,
    /// MOT ground-truth file to replay.
    #[arg(long, env = "NBTRACK_MOT")]
    pub mot: Option<PathBuf>,
    /// Object to track in a MOT file (default: lowest id in the first frame).
    #[arg(long, requires = "mot")]
    pub target: Option<u32>,
    /// Seeds for scenarios; for MOT input the first seed draws appearances.
    #[arg(long, default_value = "0", env = "NBTRACK_SEEDS")]
    pub seeds: String,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Backtracking length in frames.
    #[arg(long, env = "NBTRACK_TAU")]
    pub tau: Option<usize>,
    /// Confidence ratio filter.
    #[arg(long, env = "NBTRACK_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "NBTRACK_NMS_IOU")]
    pub nms_iou: Option<f64>,
    #[arg(long, env = "NBTRACK_NMS_SIGMA")]
    pub nms_sigma: Option<f64>,
    /// Stability gate threshold on average tracklet IoU.
    #[arg(long, env = "NBTRACK_GATE_IOU")]
    pub gate_iou: Option<f64>,
    /// Leave the motion-predicted candidate out.
    #[arg(long, env = "NBTRACK_NO_KALMAN")]
    pub no_kalman: bool,
}

impl EngineArgs {
    pub fn resolve(&self) -> CliResult<EngineConfig> {
        let mut cfg = EngineConfig::default();
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.nms_iou {
            cfg.nms_iou = v;
        }
        if let Some(v) = self.nms_sigma {
            cfg.nms_sigma = v;
        }
        if let Some(v) = self.gate_iou {
            cfg.gate_iou = v;
        }
        cfg.kalman = !self.no_kalman;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Run only the argmax baseline.
    #[arg(long, env = "NBTRACK_BASELINE_ONLY")]
    pub baseline_only: bool,
    #[arg(long, env = "NBTRACK_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Score the output directory of a previous `track` run instead of
    /// tracking again.
    #[arg(long, conflicts_with_all = ["scenario", "scene", "mot", "ablate"])]
    pub runs: Option<PathBuf>,
    /// Parameter sweep: `tau=1,3,9,27`, `gate=0.4,0.6`, or `kalman`.
    #[arg(long, env = "NBTRACK_ABLATE")]
    pub ablate: Option<String>,
    /// Timing rounds per ablation setting; each sequence counts its fastest run.
    #[arg(long, default_value_t = 3, env = "NBTRACK_REPEATS")]
    pub repeats: usize,
    /// Frames skipped after a failure.
    #[arg(long, default_value_t = 5, env = "NBTRACK_SKIP")]
    pub skip: usize,
    #[arg(long, env = "NBTRACK_OUT")]
    pub out: PathBuf,
}

/// Parses `3`, `0..10`, `1,2,5..7`.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Config(format!("invalid seed list {spec:?}"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("seed list {spec:?} is empty")));
    }
    Ok(out)
}
