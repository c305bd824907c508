//! Scripted scenario generation.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::appearance::{random_unit, with_similarity};
use crate::error::{SimError, SimResult};
use crate::rng::{stream, SCENE};
use crate::scene::{DriftSpike, ObjectSpec, Occluder, Occlusion, Scene, SensorModel, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// One object, nothing else.
    Single,
    /// Two look-alikes pass each other in opposite directions; the target is
    /// fully hidden by scenery while they pass.
    Crossing,
    /// Look-alikes moving side by side; the target is hidden for a while.
    Convoy,
    /// The target's appearance changes abruptly next to a similar object.
    Deform,
    /// The target is hidden while a look-alike sweeps through its position
    /// at right angles.
    Blackout,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] =
        [ScenarioKind::Single, ScenarioKind::Crossing, ScenarioKind::Convoy, ScenarioKind::Deform, ScenarioKind::Blackout];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Single => "single",
            ScenarioKind::Crossing => "crossing",
            ScenarioKind::Convoy => "convoy",
            ScenarioKind::Deform => "deform",
            ScenarioKind::Blackout => "blackout",
        }
    }

    pub fn from_name(name: &str) -> SimResult<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name).ok_or_else(|| SimError::UnknownScenario {
            name: name.to_string(),
            valid: Self::ALL.map(|k| k.name()).join(", "),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Minimum scene length; scripted events may extend it.
    pub length: usize,
    pub bounds: (f64, f64),
    pub appearance_dim: usize,
    /// Box width range; height is `aspect * width`.
    pub width: (f64, f64),
    pub aspect: f64,
    /// Per-frame speed range, pixels.
    pub speed: (f64, f64),
    /// Cosine similarity range between target and distractor appearance.
    pub similarity: (f64, f64),
    /// Baseline appearance drift per frame.
    pub drift: f64,
    /// Drift rate during the deformation window.
    pub spike_rate: f64,
    /// Length range of the convoy occlusion, frames.
    pub occlusion_frames: (usize, usize),
    /// Spacing between convoy lanes, as a fraction of box height.
    pub lane_gap: (f64, f64),
    /// Frames the target stays hidden after a passing distractor has left
    /// its search region.
    pub clear_frames: usize,
    pub sensor: SensorModel,
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        let base = ScenarioConfig {
            kind,
            length: 100,
            bounds: (640.0, 480.0),
            appearance_dim: 16,
            width: (16.0, 28.0),
            aspect: 2.0,
            speed: (2.0, 4.0),
            similarity: (0.85, 0.95),
            drift: 0.0,
            spike_rate: 0.0,
            occlusion_frames: (15, 30),
            lane_gap: (0.2, 0.6),
            clear_frames: 12,
            sensor: SensorModel { jitter: 0.3, ..SensorModel::default() },
        };
        match kind {
            ScenarioKind::Single => {
                ScenarioConfig { length: 60, sensor: SensorModel::default(), ..base }
            }
            ScenarioKind::Crossing => ScenarioConfig { length: 140, ..base },
            ScenarioKind::Convoy => {
                ScenarioConfig { speed: (1.5, 3.0), similarity: (0.95, 0.95), ..base }
            }
            ScenarioKind::Deform => {
                ScenarioConfig { drift: 0.005, spike_rate: 0.15, similarity: (0.7, 0.8), ..base }
            }
            ScenarioKind::Blackout => ScenarioConfig { length: 120, speed: (2.0, 3.0), similarity: (0.9, 0.9), ..base },
        }
    }

    pub fn by_name(name: &str) -> SimResult<Self> {
        Ok(Self::preset(ScenarioKind::from_name(name)?))
    }

    /// Parses a TOML scenario. Keys not given fall back to the preset of the
    /// declared `kind`.
    pub fn from_toml(text: &str) -> SimResult<Self> {
        let table: toml::Table = toml::from_str(text)?;
        let kind = match table.get("kind") {
            Some(toml::Value::String(s)) => ScenarioKind::from_name(s)?,
            Some(_) => return Err(SimError::config("`kind` must be a string")),
            None => return Err(SimError::config("scenario file needs a `kind`")),
        };
        let mut merged = toml::Table::try_from(Self::preset(kind)).map_err(|e| SimError::config(e.to_string()))?;
        for (k, v) in table {
            match (merged.get_mut(&k), v) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
                (_, v) => {
                    merged.insert(k, v);
                }
            }
        }
        let cfg: ScenarioConfig = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> SimResult<()> {
        let range = |name: &str, r: (f64, f64), lo: f64, hi: f64| {
            if r.0 <= r.1 && r.0 >= lo && r.1 <= hi {
                Ok(())
            } else {
                Err(SimError::config(format!("{name} range {r:?} invalid")))
            }
        };
        range("width", self.width, f64::MIN_POSITIVE, f64::MAX)?;
        range("speed", self.speed, 0.0, f64::MAX)?;
        range("similarity", self.similarity, -1.0, 1.0)?;
        range("lane_gap", self.lane_gap, 0.0, f64::MAX)?;
        if self.length < 2 || self.appearance_dim < 2 || !(self.aspect > 0.0) {
            return Err(SimError::config("length, appearance_dim and aspect must be positive (length, dim >= 2)"));
        }
        if self.occlusion_frames.0 > self.occlusion_frames.1 || self.occlusion_frames.0 == 0 {
            return Err(SimError::config("occlusion_frames must be a non-empty range"));
        }
        if !(self.drift >= 0.0 && self.spike_rate >= 0.0) {
            return Err(SimError::config("drift rates must be non-negative"));
        }
        let s = &self.sensor;
        if !(s.jitter >= 0.0 && s.search_radius_scale > 0.0 && (0.0..=1.0).contains(&s.clutter_max_score)) {
            return Err(SimError::config("sensor parameters out of range"));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.gen_range(r.0..=r.1)
    }
}

fn line(size: (f64, f64), from: (usize, f64, f64), to: (usize, f64, f64)) -> Trajectory {
    Trajectory::Waypoints { size, points: vec![from, to] }
}

fn object(id: u32, trajectory: Trajectory, appearance: Vec<f64>, drift: f64) -> ObjectSpec {
    ObjectSpec { id, trajectory, appearance, drift, drift_spikes: vec![], occlusions: vec![] }
}

/// Frames between a passing distractor entering the search region and the
/// closest approach, for relative speed `rel`.
fn approach_frames(cfg: &ScenarioConfig, size: (f64, f64), rel: f64) -> usize {
    let diag = size.0.hypot(size.1);
    let reach = 1.1 * cfg.sensor.search_radius_scale * diag + 4.0 * cfg.sensor.jitter;
    (reach / rel.max(1e-6)).ceil() as usize + 2
}

pub fn generate_scene(cfg: &ScenarioConfig, seed: u64) -> SimResult<Scene> {
    cfg.validate()?;
    let mut rng = stream(seed, &[SCENE, cfg.kind as u64]);
    let w = draw(&mut rng, cfg.width);
    let size = (w, cfg.aspect * w);
    let (bw, bh) = cfg.bounds;
    let dim = cfg.appearance_dim;
    let a_app = random_unit(&mut rng, dim);
    let sim = draw(&mut rng, cfg.similarity);
    let b_app = with_similarity(&mut rng, &a_app, sim);
    let mut length = cfg.length;

    let objects = match cfg.kind {
        ScenarioKind::Single => {
            let speed = draw(&mut rng, cfg.speed);
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            let traj = Trajectory::Sinusoid {
                size,
                start: (rng.gen_range(0.3..0.7) * bw, rng.gen_range(0.3..0.7) * bh),
                velocity: (speed * heading.cos(), speed * heading.sin()),
                amplitude: (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)),
                period: rng.gen_range(20.0..60.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            };
            vec![object(1, traj, a_app, cfg.drift)]
        }
        ScenarioKind::Crossing => {
            let va = draw(&mut rng, cfg.speed);
            let vb = draw(&mut rng, cfg.speed);
            let dy = rng.gen_range(0.25..0.75) * size.1 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let m = approach_frames(cfg, size, va + vb);
            let onset_gap = m;
            let clear_gap = m + cfg.clear_frames;
            let kc = (10 + onset_gap).max(length * 2 / 5);
            length = length.max(kc + clear_gap + 20);
            let (xc, y0) = (0.5 * bw, 0.5 * bh);
            let last = length - 1;
            let fc = kc as f64;
            let a = line(size, (0, xc - va * fc, y0), (last, xc + va * (last as f64 - fc), y0));
            let b = line(size, (0, xc + vb * fc, y0 + dy), (last, xc - vb * (last as f64 - fc), y0 + dy));
            let mut a = object(1, a, a_app, cfg.drift);
            a.occlusions.push(Occlusion { start: kc - onset_gap, end: kc + clear_gap, occluder: Occluder::Static, severity: 1.0 });
            vec![a, object(2, b, b_app, cfg.drift)]
        }
        ScenarioKind::Convoy => {
            let v = draw(&mut rng, cfg.speed);
            let heading: f64 = rng.gen_range(-0.2..0.2);
            let (vx, vy) = (v * heading.cos(), v * heading.sin());
            let gap = (1.0 + draw(&mut rng, cfg.lane_gap)) * size.1;
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lead = rng.gen_range(-0.3..0.3) * size.0;
            let hidden = rng.gen_range(cfg.occlusion_frames.0..=cfg.occlusion_frames.1);
            let start = rng.gen_range(15..=30usize);
            length = length.max(start + hidden + 25);
            let last = length - 1;
            let (x0, y0) = (0.2 * bw, 0.5 * bh);
            let lf = last as f64;
            let a = line(size, (0, x0, y0), (last, x0 + vx * lf, y0 + vy * lf));
            let b = line(
                size,
                (0, x0 + lead, y0 + side * gap),
                (last, x0 + lead + vx * lf, y0 + side * gap + vy * lf),
            );
            let mut a = object(1, a, a_app, cfg.drift);
            a.occlusions.push(Occlusion { start, end: start + hidden - 1, occluder: Occluder::Static, severity: 1.0 });
            vec![a, object(2, b, b_app, cfg.drift)]
        }
        ScenarioKind::Deform => {
            let v = draw(&mut rng, cfg.speed);
            let gap = (1.5 + draw(&mut rng, cfg.lane_gap)) * size.1;
            let last = length - 1;
            let (x0, y0) = (0.2 * bw, 0.5 * bh);
            let lf = last as f64;
            let mut a = object(1, line(size, (0, x0, y0), (last, x0 + v * lf, y0)), a_app, cfg.drift);
            let s = length / 2 - 5;
            a.drift_spikes.push(DriftSpike { start: s, end: s + 9, rate: cfg.spike_rate });
            let b = line(size, (0, x0, y0 + gap), (last, x0 + v * lf, y0 + gap));
            vec![a, object(2, b, b_app, cfg.drift)]
        }
        ScenarioKind::Blackout => {
            let va = draw(&mut rng, cfg.speed);
            let vb = 2.0 * draw(&mut rng, cfg.speed);
            let m = approach_frames(cfg, size, va.hypot(vb));
            let clear_gap = m + cfg.clear_frames;
            let kc = (10 + m).max(length * 2 / 5);
            length = length.max(kc + clear_gap + 20);
            let last = length - 1;
            let (xc, y0) = (0.5 * bw, 0.5 * bh);
            let (fc, lf) = (kc as f64, last as f64);
            let dx = rng.gen_range(-0.3..0.3) * size.0;
            let a = line(size, (0, xc - va * fc, y0), (last, xc + va * (lf - fc), y0));
            let b = line(size, (0, xc + dx, y0 - vb * fc), (last, xc + dx, y0 + vb * (lf - fc)));
            let mut a = object(1, a, a_app, cfg.drift);
            a.occlusions.push(Occlusion { start: kc - m, end: kc + clear_gap, occluder: Occluder::Static, severity: 1.0 });
            vec![a, object(2, b, b_app, cfg.drift)]
        }
    };

    let scene = Scene { length, bounds: cfg.bounds, seed, target: 1, sensor: cfg.sensor, objects };
    scene.validate()?;
    Ok(scene)
}
