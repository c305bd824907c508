//! Running the baseline and the engine over one scene and scoring both.

use std::ops::Range;
use std::time::Instant;

use nbtrack_core::{run_baseline, run_sequence, BBox, EngineConfig, SequenceRun};
use nbtrack_eval::{evaluate, EvalConfig, EvalReport};
use nbtrack_sim::{Scene, World};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Truth {
    pub frames: Range<usize>,
    pub target: u32,
    pub gt: Vec<BBox>,
    pub objects: Vec<(u32, Vec<Option<BBox>>)>,
}

impl Truth {
    pub fn of(scene: &Scene) -> Self {
        let frames = scene.target_frames();
        let gt = scene.truth(scene.target)[frames.clone()].iter().map(|b| b.expect("target present")).collect();
        let objects = scene.objects.iter().map(|o| (o.id, scene.truth(o.id)[frames.clone()].to_vec())).collect();
        Self { frames, target: scene.target, gt, objects }
    }

    pub fn score(&self, pred: &[BBox], cfg: &EvalConfig) -> CliResult<EvalReport> {
        evaluate(pred, &self.gt, &self.objects, self.target, cfg).map_err(CliError::from)
    }
}

#[derive(Debug, Clone)]
pub struct SceneRun {
    pub truth: Truth,
    pub baseline: Vec<BBox>,
    pub baseline_report: EvalReport,
    pub engine: Option<SequenceRun>,
    pub engine_report: Option<EvalReport>,
    /// Engine wall-clock time per processed frame, seconds.
    pub engine_frame_secs: Option<f64>,
}

/// Runs the argmax baseline and, unless `engine` is `None`, the engine.
pub fn run_scene(scene: &Scene, engine: Option<&EngineConfig>, eval: &EvalConfig) -> CliResult<SceneRun> {
    let world = World::new(scene.clone())?;
    let truth = Truth::of(scene);
    let b0 = world.initial_box();
    let baseline = run_baseline(&world, truth.frames.clone(), b0)?;
    let baseline_report = truth.score(&baseline, eval)?;
    let (engine_run, engine_report, secs) = match engine {
        Some(cfg) => {
            let start = Instant::now();
            let run = run_sequence(&world, truth.frames.clone(), b0, *cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            let report = truth.score(&run.boxes, eval)?;
            let steps = run.log.len().max(1);
            (Some(run), Some(report), Some(elapsed / steps as f64))
        }
        None => (None, None, None),
    };
    Ok(SceneRun { truth, baseline, baseline_report, engine: engine_run, engine_report, engine_frame_secs: secs })
}
