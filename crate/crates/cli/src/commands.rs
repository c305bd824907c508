use std::fs;
use std::path::{Path, PathBuf};

use nbtrack_core::{BBox, EngineConfig, FrameRecord};
use nbtrack_eval::{EvalConfig, EvalReport};
use nbtrack_sim::{generate_scene, load_mot, ScenarioConfig, Scene};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{parse_seeds, EvaluateArgs, InputArgs, SimulateArgs, TrackArgs};
use crate::error::{CliError, CliResult};
use crate::runner::{run_scene, SceneRun, Truth};

/// One scene to track, with a name unique within a run.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub source: String,
    pub scene: Scene,
}

fn scenario_config(spec: &str) -> CliResult<(String, ScenarioConfig)> {
    let path = Path::new(spec);
    if spec.ends_with(".toml") || path.is_file() {
        let cfg = ScenarioConfig::from_file(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
        Ok((stem, cfg))
    } else {
        Ok((spec.to_string(), ScenarioConfig::by_name(spec)?))
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene").to_string()
}

pub fn load_inputs(input: &InputArgs) -> CliResult<Vec<Sequence>> {
    let seeds = parse_seeds(&input.seeds)?;
    if let Some(spec) = &input.scenario {
        let (name, cfg) = scenario_config(spec)?;
        return seeds
            .iter()
            .map(|&seed| {
                Ok(Sequence { name: format!("{name}-{seed:03}"), source: spec.clone(), scene: generate_scene(&cfg, seed)? })
            })
            .collect();
    }
    if let Some(path) = &input.mot {
        let mut scene = load_mot(path, seeds[0])?;
        if let Some(t) = input.target {
            scene.target = t;
            scene.validate()?;
        }
        return Ok(vec![Sequence { name: file_stem(path), source: path.display().to_string(), scene }]);
    }
    if !input.scene.is_empty() {
        return input
            .scene
            .iter()
            .map(|path| {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let scene = Scene::from_json(&text)?;
                Ok(Sequence { name: file_stem(path), source: path.display().to_string(), scene })
            })
            .collect();
    }
    Err(CliError::Config("no input: give --scenario, --scene or --mot".into()))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    let (name, cfg) = scenario_config(&args.scenario)?;
    let seeds = parse_seeds(&args.seeds)?;
    create_dir(&args.out)?;
    let mut written = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let scene = generate_scene(&cfg, seed)?;
        let path = args.out.join(format!("{name}-{seed:03}.json"));
        write_file(&path, &(scene.to_json() + "\n"))?;
        written.push(path);
    }
    Ok(written)
}

/// Everything needed to reproduce a sequence's outputs; written as the
/// first line of each result file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub sequence: String,
    pub source: String,
    pub seed: u64,
    pub target: u32,
    pub frames: (usize, usize),
    pub engine: Option<EngineConfig>,
}

impl ResolvedConfig {
    fn new(seq: &Sequence, engine: Option<&EngineConfig>) -> Self {
        let f = seq.scene.target_frames();
        Self {
            sequence: seq.name.clone(),
            source: seq.source.clone(),
            seed: seq.scene.seed,
            target: seq.scene.target,
            frames: (f.start, f.end),
            engine: engine.copied(),
        }
    }

    fn header(&self) -> String {
        format!("# {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

pub fn boxes_csv(header: &str, first_frame: usize, boxes: &[BBox]) -> String {
    let mut s = String::from(header);
    s.push_str("frame,x,y,w,h\n");
    for (i, b) in boxes.iter().enumerate() {
        s.push_str(&format!("{},{},{},{},{}\n", first_frame + i, b.x(), b.y(), b.w(), b.h()));
    }
    s
}

pub fn read_boxes_csv(path: &Path) -> CliResult<Vec<(usize, BBox)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<(usize, f64, f64, f64, f64)>().enumerate() {
        let (f, x, y, w, h) = row.map_err(|e| CliError::Runtime(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        let b = BBox::new(x, y, w, h).map_err(|e| CliError::Runtime(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        out.push((f, b));
    }
    Ok(out)
}

fn log_jsonl(log: &[FrameRecord]) -> String {
    let mut s = String::new();
    for r in log {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Runtime(e.to_string()))
}

fn run_all(seqs: &[Sequence], engine: Option<&EngineConfig>, eval: &EvalConfig, jobs: usize) -> CliResult<Vec<SceneRun>> {
    pool(jobs)?.install(|| seqs.par_iter().map(|s| run_scene(&s.scene, engine, eval)).collect())
}

#[derive(Debug, Clone)]
pub struct TrackedSequence {
    pub name: String,
    pub dir: PathBuf,
    pub baseline: EvalReport,
    pub engine: Option<EvalReport>,
}

pub fn cmd_track(args: &TrackArgs, jobs: usize) -> CliResult<Vec<TrackedSequence>> {
    let engine = if args.baseline_only { None } else { Some(args.engine.resolve()?) };
    let seqs = load_inputs(&args.input)?;
    create_dir(&args.out)?;
    let runs = run_all(&seqs, engine.as_ref(), &EvalConfig::default(), jobs)?;
    let mut out = Vec::with_capacity(seqs.len());
    for (seq, run) in seqs.iter().zip(runs) {
        let dir = args.out.join(&seq.name);
        create_dir(&dir)?;
        let header = ResolvedConfig::new(seq, engine.as_ref()).header();
        let first = run.truth.frames.start;
        write_file(&dir.join("scene.json"), &(seq.scene.to_json() + "\n"))?;
        write_file(&dir.join("baseline.csv"), &boxes_csv(&header, first, &run.baseline))?;
        if let Some(e) = &run.engine {
            write_file(&dir.join("engine.csv"), &boxes_csv(&header, first, &e.boxes))?;
            write_file(&dir.join("engine_log.jsonl"), &log_jsonl(&e.log))?;
        }
        out.push(TrackedSequence { name: seq.name.clone(), dir, baseline: run.baseline_report, engine: run.engine_report });
    }
    Ok(out)
}

/// Metric means over a set of sequences.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanReport {
    pub accuracy: f64,
    pub robustness: f64,
    pub eao_lite: f64,
    pub auc: f64,
    pub precision: f64,
    pub norm_precision: f64,
    pub ao: f64,
    pub sr50: f64,
    pub sr75: f64,
    pub id_switches: f64,
    /// Fraction of sequences with at least one identity switch.
    pub switch_rate: f64,
}

impl MeanReport {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> Self {
        let mut m = MeanReport::default();
        let mut n = 0usize;
        for r in reports {
            n += 1;
            m.accuracy += r.accuracy;
            m.robustness += r.robustness;
            m.eao_lite += r.eao_lite;
            m.auc += r.auc;
            m.precision += r.precision;
            m.norm_precision += r.norm_precision;
            m.ao += r.ao;
            m.sr50 += r.sr50;
            m.sr75 += r.sr75;
            m.id_switches += r.id_switches as f64;
            m.switch_rate += if r.id_switches > 0 { 1.0 } else { 0.0 };
        }
        if n > 0 {
            let k = n as f64;
            for v in m.fields_mut() {
                *v /= k;
            }
        }
        m
    }

    fn fields_mut(&mut self) -> [&mut f64; 11] {
        [
            &mut self.accuracy,
            &mut self.robustness,
            &mut self.eao_lite,
            &mut self.auc,
            &mut self.precision,
            &mut self.norm_precision,
            &mut self.ao,
            &mut self.sr50,
            &mut self.sr75,
            &mut self.id_switches,
            &mut self.switch_rate,
        ]
    }

    pub fn named(&self) -> [(&'static str, f64); 11] {
        [
            ("accuracy", self.accuracy),
            ("robustness", self.robustness),
            ("eao_lite", self.eao_lite),
            ("auc", self.auc),
            ("precision", self.precision),
            ("norm_precision", self.norm_precision),
            ("ao", self.ao),
            ("sr50", self.sr50),
            ("sr75", self.sr75),
            ("id_switches", self.id_switches),
            ("switch_rate", self.switch_rate),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub baseline: EvalReport,
    pub engine: Option<EvalReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub baseline: f64,
    pub engine: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub tau: usize,
    pub kalman: bool,
    pub gate_iou: f64,
    pub auc: f64,
    pub robustness: f64,
    pub eao_lite: f64,
    pub ao: f64,
    pub switch_rate: f64,
    /// Fastest of the timing repetitions, engine milliseconds per frame.
    pub ms_per_frame: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub engine_config: Option<EngineConfig>,
    pub eval_config: EvalConfig,
    pub sequences: Vec<SequenceReport>,
    pub baseline: MeanReport,
    pub engine: Option<MeanReport>,
    pub comparison: Vec<ComparisonRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ablation: Vec<AblationRow>,
}

/// Splits an ablation spec into labelled engine configurations.
pub fn ablation_settings(spec: &str, base: &EngineConfig) -> CliResult<Vec<(String, EngineConfig)>> {
    let bad = |why: &str| CliError::Config(format!("invalid --ablate {spec:?}: {why}"));
    let spec = spec.trim();
    if spec == "kalman" {
        return Ok(vec![
            ("kalman=on".into(), EngineConfig { kalman: true, ..*base }),
            ("kalman=off".into(), EngineConfig { kalman: false, ..*base }),
        ]);
    }
    let (key, values) = spec.split_once('=').ok_or_else(|| bad("expected key=values or `kalman`"))?;
    let mut out = Vec::new();
    for v in values.split(',').map(str::trim) {
        let cfg = match key.trim() {
            "tau" => EngineConfig { tau: v.parse().map_err(|_| bad("tau values must be integers"))?, ..*base },
            "gate" => EngineConfig { gate_iou: v.parse().map_err(|_| bad("gate values must be numbers"))?, ..*base },
            _ => return Err(bad("unknown key; use tau, gate or kalman")),
        };
        cfg.validate().map_err(|e| bad(&e.to_string()))?;
        out.push((format!("{}={v}", key.trim()), cfg));
    }
    if out.is_empty() {
        return Err(bad("no values"));
    }
    Ok(out)
}

fn compare(base: &MeanReport, eng: &MeanReport) -> Vec<ComparisonRow> {
    base.named()
        .iter()
        .zip(eng.named())
        .map(|(&(metric, b), (_, e))| ComparisonRow { metric: metric.into(), baseline: b, engine: e, delta: e - b })
        .collect()
}

fn reports_from_runs(dir: &Path, eval: &EvalConfig) -> CliResult<Vec<SequenceReport>> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("baseline.csv").is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Runtime(format!("{}: no tracking runs found", dir.display())));
    }
    subdirs
        .iter()
        .map(|d| {
            let scene_path = d.join("scene.json");
            let text = fs::read_to_string(&scene_path).map_err(|e| CliError::io(&scene_path, e))?;
            let truth = Truth::of(&Scene::from_json(&text)?);
            let score = |file: &str| -> CliResult<EvalReport> {
                let path = d.join(file);
                let rows = read_boxes_csv(&path)?;
                let frames: Vec<usize> = rows.iter().map(|r| r.0).collect();
                if !frames.iter().copied().eq(truth.frames.clone()) {
                    return Err(CliError::Runtime(format!(
                        "{}: frames do not match the scene (expected {:?})",
                        path.display(),
                        truth.frames
                    )));
                }
                let boxes: Vec<BBox> = rows.into_iter().map(|r| r.1).collect();
                truth.score(&boxes, eval)
            };
            let baseline = score("baseline.csv")?;
            let engine = if d.join("engine.csv").is_file() { Some(score("engine.csv")?) } else { None };
            Ok(SequenceReport { name: file_stem(d), baseline, engine })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
struct MetricsRow<'a> {
    sequence: &'a str,
    system: &'a str,
    frames: usize,
    accuracy: f64,
    robustness: f64,
    failures: usize,
    eao_lite: f64,
    auc: f64,
    precision: f64,
    norm_precision: f64,
    ao: f64,
    sr50: f64,
    sr75: f64,
    id_switches: usize,
}

impl<'a> MetricsRow<'a> {
    fn new(sequence: &'a str, system: &'a str, r: &EvalReport) -> Self {
        Self {
            sequence,
            system,
            frames: r.frames,
            accuracy: r.accuracy,
            robustness: r.robustness,
            failures: r.failures,
            eao_lite: r.eao_lite,
            auc: r.auc,
            precision: r.precision,
            norm_precision: r.norm_precision,
            ao: r.ao,
            sr50: r.sr50,
            sr75: r.sr75,
            id_switches: r.id_switches,
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, jobs: usize) -> CliResult<Evaluation> {
    let eval = EvalConfig { skip: args.skip, ..EvalConfig::default() };
    create_dir(&args.out)?;

    let (engine_config, sequences, seqs) = match &args.runs {
        Some(dir) => (None, reports_from_runs(dir, &eval)?, Vec::new()),
        None => {
            let cfg = args.engine.resolve()?;
            let seqs = load_inputs(&args.input)?;
            let runs = run_all(&seqs, Some(&cfg), &eval, jobs)?;
            let reports = seqs
                .iter()
                .zip(runs)
                .map(|(s, r)| SequenceReport { name: s.name.clone(), baseline: r.baseline_report, engine: r.engine_report })
                .collect();
            (Some(cfg), reports, seqs)
        }
    };

    let baseline = MeanReport::of(sequences.iter().map(|s| &s.baseline));
    let with_engine: Vec<&EvalReport> = sequences.iter().filter_map(|s| s.engine.as_ref()).collect();
    let engine = if with_engine.is_empty() {
        None
    } else if with_engine.len() != sequences.len() {
        return Err(CliError::Runtime("engine results missing for some sequences".into()));
    } else {
        Some(MeanReport::of(with_engine))
    };
    let comparison = engine.as_ref().map(|e| compare(&baseline, e)).unwrap_or_default();

    let ablation = match &args.ablate {
        Some(spec) => run_ablation(spec, &args.engine.resolve()?, &seqs, &eval, args.repeats.max(1), jobs)?,
        None => Vec::new(),
    };

    let evaluation = Evaluation { engine_config, eval_config: eval, sequences, baseline, engine, comparison, ablation };

    let report = serde_json::to_string_pretty(&evaluation).expect("report serializes") + "\n";
    write_file(&args.out.join("report.json"), &report)?;
    let mut rows = Vec::new();
    for s in &evaluation.sequences {
        rows.push(MetricsRow::new(&s.name, "baseline", &s.baseline));
        if let Some(e) = &s.engine {
            rows.push(MetricsRow::new(&s.name, "engine", e));
        }
    }
    write_csv(&args.out.join("metrics.csv"), &rows)?;
    if !evaluation.comparison.is_empty() {
        write_csv(&args.out.join("comparison.csv"), &evaluation.comparison)?;
    }
    if !evaluation.ablation.is_empty() {
        write_csv(&args.out.join("ablation.csv"), &evaluation.ablation)?;
    }
    Ok(evaluation)
}

/// Scores each setting on every sequence and times the engine. Timing runs
/// are sequential so settings are comparable.
pub fn run_ablation(
    spec: &str,
    base: &EngineConfig,
    seqs: &[Sequence],
    eval: &EvalConfig,
    repeats: usize,
    jobs: usize,
) -> CliResult<Vec<AblationRow>> {
    let settings = ablation_settings(spec, base)?;
    let cfgs: Vec<EngineConfig> = settings.iter().map(|s| s.1).collect();
    let secs = time_engine(seqs, &cfgs, repeats)?;
    let mut rows = Vec::with_capacity(settings.len());
    for ((label, cfg), secs) in settings.into_iter().zip(secs) {
        let runs = run_all(seqs, Some(&cfg), eval, jobs)?;
        let reports: Vec<&EvalReport> = runs.iter().filter_map(|r| r.engine_report.as_ref()).collect();
        let mean = MeanReport::of(reports);
        rows.push(AblationRow {
            setting: label,
            tau: cfg.tau,
            kalman: cfg.kalman,
            gate_iou: cfg.gate_iou,
            auc: mean.auc,
            robustness: mean.robustness,
            eao_lite: mean.eao_lite,
            ao: mean.ao,
            switch_rate: mean.switch_rate,
            ms_per_frame: secs * 1e3,
        });
    }
    Ok(rows)
}

/// Single-threaded engine seconds per frame for each configuration. Every
/// sequence is timed `repeats` times per configuration, with configurations
/// taking turns, and its fastest run counts; a warm-up pass goes first.
pub fn time_engine(seqs: &[Sequence], cfgs: &[EngineConfig], repeats: usize) -> CliResult<Vec<f64>> {
    let worlds = seqs.iter().map(|s| nbtrack_sim::World::new(s.scene.clone())).collect::<Result<Vec<_>, _>>()?;
    let frames: usize = worlds.iter().map(|w| w.scene().target_frames().len().saturating_sub(1)).sum();
    let mut best = vec![vec![f64::INFINITY; worlds.len()]; cfgs.len()];
    for round in 0..=repeats.max(1) {
        for (k, cfg) in cfgs.iter().enumerate() {
            for (i, w) in worlds.iter().enumerate() {
                let start = std::time::Instant::now();
                nbtrack_core::run_sequence(w, w.scene().target_frames(), w.initial_box(), *cfg)?;
                let t = start.elapsed().as_secs_f64();
                if round > 0 {
                    best[k][i] = best[k][i].min(t);
                }
            }
        }
    }
    Ok(best.iter().map(|b| b.iter().sum::<f64>() / frames.max(1) as f64).collect())
}

/// Human-readable summary for the terminal.
pub fn print_evaluation(e: &Evaluation, mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{} sequences", e.sequences.len())?;
    if e.comparison.is_empty() {
        for (k, v) in e.baseline.named() {
            writeln!(out, "{k:>15}  {v:.4}")?;
        }
    } else {
        writeln!(out, "{:>15}  {:>9}  {:>9}  {:>9}", "metric", "baseline", "engine", "delta")?;
        for r in &e.comparison {
            writeln!(out, "{:>15}  {:>9.4}  {:>9.4}  {:>+9.4}", r.metric, r.baseline, r.engine, r.delta)?;
        }
    }
    for r in &e.ablation {
        writeln!(out, "{:>12}  auc {:.4}  robustness {:.4}  {:.3} ms/frame", r.setting, r.auc, r.robustness, r.ms_per_frame)?;
    }
    out.flush()
}
