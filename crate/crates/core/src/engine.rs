//! Per-frame orchestration and the public tracking API.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, tracklet_avg_iou, BBox, Tracklet};
use crate::matching::{build_weights, hungarian_max, resolve_target, Selection};
use crate::motion::{MotionConfig, MotionState};
use crate::pools::{backtrack, build_candidate_pool, update_neighbor_pool, NeighborPool};
use crate::port::{Template, TrackerPort};
use crate::select::{assemble, filter_by_confidence, soft_nms, CandidateSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Confidence ratio below which proposals are discarded.
    pub alpha: f64,
    pub nms_iou: f64,
    pub nms_sigma: f64,
    /// Decayed soft-NMS scores below this are dropped.
    pub nms_floor: f64,
    /// Backtracking length in frames.
    pub tau: usize,
    /// Average tracklet IoU above which the top candidate is accepted
    /// without matching.
    pub gate_iou: f64,
    pub kalman: bool,
    /// Minimum IoU for carrying a neighbor tracklet through a stable frame.
    pub neighbor_assoc_iou: f64,
    pub motion: MotionConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            nms_iou: 0.25,
            nms_sigma: 0.01,
            nms_floor: 1e-3,
            tau: 9,
            gate_iou: 0.6,
            kalman: true,
            neighbor_assoc_iou: 0.3,
            motion: MotionConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("{v} not in [0, 1]") })
            }
        };
        unit("alpha", self.alpha)?;
        unit("nms_iou", self.nms_iou)?;
        unit("nms_floor", self.nms_floor)?;
        unit("gate_iou", self.gate_iou)?;
        unit("neighbor_assoc_iou", self.neighbor_assoc_iou)?;
        if !(self.nms_sigma > 0.0) {
            return Err(Error::InvalidParameter { name: "nms_sigma", reason: "must be positive".into() });
        }
        if self.tau == 0 {
            return Err(Error::InvalidParameter { name: "tau", reason: "must be at least 1".into() });
        }
        let m = &self.motion;
        if !(m.std_weight_position > 0.0 && m.std_weight_velocity > 0.0 && m.min_size > 0.0) {
            return Err(Error::InvalidParameter { name: "motion", reason: "noise scales must be positive".into() });
        }
        Ok(())
    }
}

/// Which path a frame took through the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// Only one candidate; nothing to match.
    Single,
    /// The top candidate's backward tracklet agrees with the target history.
    Stable,
    /// Full matching against neighbors and target ran.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No candidate could be tied to the target; the top-scoring box was used.
    DegradedArgmax,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub gate: Gate,
    pub candidates: usize,
    pub kalman_index: Option<usize>,
    pub top: usize,
    pub top_avg_iou: Option<f64>,
    pub weights: Option<Vec<Vec<f64>>>,
    pub assignment: Option<Vec<(usize, usize)>>,
    pub selection: Option<Selection>,
    pub fallback: Option<Fallback>,
    pub selected: usize,
    pub selected_kalman: bool,
    pub output: BBox,
    pub neighbors: usize,
}

/// Everything the engine remembers between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    /// The engine's own results for the last `tau` frames, newest first.
    pub target: Tracklet,
    pub neighbors: NeighborPool,
    pub motion: MotionState,
    /// Fixed at the first frame; never refreshed.
    pub template: Template,
    pub frame: usize,
    pub config: EngineConfig,
}

impl EngineState {
    pub fn last_box(&self) -> &BBox {
        self.target.head()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    state: EngineState,
}

impl Engine {
    pub fn init<P: TrackerPort + ?Sized>(port: &P, frame0: usize, b0: BBox, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let template = port.make_template(frame0, &b0)?;
        let state = EngineState {
            target: Tracklet::single(frame0, b0),
            neighbors: NeighborPool::default(),
            motion: MotionState::init(&b0, frame0, &config.motion),
            template,
            frame: frame0,
            config,
        };
        Ok(Self { state })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn into_state(self) -> EngineState {
        self.state
    }

    pub fn from_state(state: EngineState) -> Self {
        Self { state }
    }

    /// Processes frame `state.frame + 1` and returns the selected box.
    pub fn step<P: TrackerPort + ?Sized>(&mut self, port: &P, frame: usize) -> Result<(BBox, FrameRecord)> {
        let st = &self.state;
        let cfg = st.config;
        let t = st.frame + 1;
        if frame != t {
            return Err(Error::UnexpectedFrame { expected: t, got: frame });
        }

        let raw = port.propose(&st.template, t, st.last_box())?;
        let filtered = filter_by_confidence(&raw, cfg.alpha)?;
        let kept = soft_nms(&filtered, cfg.nms_iou, cfg.nms_sigma, cfg.nms_floor)?;
        let (kalman_box, predicted) = st.motion.predict(&cfg.motion);
        let cands = assemble(&kept, cfg.kalman.then_some(kalman_box));
        let top = cands.top();

        let mut record = FrameRecord {
            frame: t,
            gate: Gate::Single,
            candidates: cands.len(),
            kalman_index: cands.kalman_index(),
            top,
            top_avg_iou: None,
            weights: None,
            assignment: None,
            selection: None,
            fallback: None,
            selected: top,
            selected_kalman: false,
            output: cands.boxes()[top],
            neighbors: 0,
        };

        let (selected, neighbors) = if cands.len() == 1 {
            (top, advance_neighbors(&st.neighbors, &cands, top, t, &cfg))
        } else {
            let top_tracklet = backtrack(port, t, &cands.boxes()[top], cfg.tau)?;
            record.top_avg_iou = Some(tracklet_avg_iou(&st.target, &top_tracklet)?);
            if is_stable(&cands, &st.target, &top_tracklet, cfg.gate_iou)? {
                record.gate = Gate::Stable;
                (top, advance_neighbors(&st.neighbors, &cands, top, t, &cfg))
            } else {
                record.gate = Gate::Unstable;
                let pool = build_candidate_pool(&cands, port, t, cfg.tau, Some((top, &top_tracklet)))?;
                let weights = build_weights(&pool, &st.neighbors, &st.target)?;
                let assignment = hungarian_max(&weights);
                let chosen = match resolve_target(&assignment, &weights, &cands) {
                    Ok((m, how)) => {
                        record.selection = Some(how);
                        m
                    }
                    Err(Error::NoViableCandidate) => {
                        log::warn!("frame {t}: no viable candidate, using top-scoring box");
                        record.fallback = Some(Fallback::DegradedArgmax);
                        top
                    }
                    Err(e) => return Err(e),
                };
                record.weights = Some(weights.to_rows());
                record.assignment = Some(assignment.pairs);
                (chosen, update_neighbor_pool(&pool, chosen, cfg.tau)?)
            }
        };

        let out = cands.boxes()[selected];
        record.selected = selected;
        record.selected_kalman = cands.is_kalman(selected);
        record.output = out;
        record.neighbors = neighbors.len();

        let st = &mut self.state;
        st.target.prepend(out, cfg.tau);
        st.neighbors = neighbors;
        st.motion = predicted.update(&out, &cfg.motion);
        st.frame = t;
        Ok((out, record))
    }
}

/// Stability gate. A lone candidate (the motion-predicted box included in the
/// count) leaves nothing to match; otherwise the top candidate's backward
/// tracklet has to agree with the target history.
pub fn is_stable(cands: &CandidateSet, target: &Tracklet, top_tracklet: &Tracklet, threshold: f64) -> Result<bool> {
    if cands.len() == 1 {
        return Ok(true);
    }
    Ok(tracklet_avg_iou(target, top_tracklet)? > threshold)
}

/// Neighbor maintenance for frames that skip matching. Each unselected
/// appearance candidate extends the previous-frame neighbor tracklet it
/// overlaps best (greedy, IoU at least `neighbor_assoc_iou`) or starts a new
/// one; neighbors left without a candidate are dropped. The motion-predicted
/// box is not a neighbor.
fn advance_neighbors(prev: &NeighborPool, cands: &CandidateSet, selected: usize, t: usize, cfg: &EngineConfig) -> NeighborPool {
    let free: Vec<usize> = (0..cands.len()).filter(|&i| i != selected && !cands.is_kalman(i)).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for &ci in &free {
        for (ni, n) in prev.entries.iter().enumerate() {
            let o = iou(&cands.boxes()[ci], n.head());
            if o >= cfg.neighbor_assoc_iou && o > 0.0 {
                pairs.push((o, ci, ni));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut link: Vec<Option<usize>> = vec![None; cands.len()];
    let mut taken = vec![false; prev.entries.len()];
    for (_, ci, ni) in pairs {
        if link[ci].is_none() && !taken[ni] {
            link[ci] = Some(ni);
            taken[ni] = true;
        }
    }

    let entries = free
        .into_iter()
        .map(|ci| {
            let b = cands.boxes()[ci];
            match link[ci] {
                Some(ni) if prev.entries[ni].end_frame() + 1 == t => {
                    let mut tr = prev.entries[ni].clone();
                    tr.prepend(b, cfg.tau);
                    tr
                }
                _ => Tracklet::single(t, b),
            }
        })
        .collect();
    NeighborPool { entries }
}

/// Result of running a tracker over a range of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    pub first_frame: usize,
    pub boxes: Vec<BBox>,
    pub log: Vec<FrameRecord>,
}

pub fn run_sequence<P: TrackerPort + ?Sized>(port: &P, frames: Range<usize>, b0: BBox, cfg: EngineConfig) -> Result<SequenceRun> {
    check_range(port, &frames)?;
    let mut engine = Engine::init(port, frames.start, b0, cfg)?;
    let mut boxes = vec![b0];
    let mut log = Vec::with_capacity(frames.len().saturating_sub(1));
    for f in frames.start + 1..frames.end {
        let (b, rec) = engine.step(port, f)?;
        boxes.push(b);
        log.push(rec);
    }
    Ok(SequenceRun { first_frame: frames.start, boxes, log })
}

/// The plain backbone: highest-confidence proposal each frame, searched
/// around the previous result, template fixed at the first frame.
pub fn run_baseline<P: TrackerPort + ?Sized>(port: &P, frames: Range<usize>, b0: BBox) -> Result<Vec<BBox>> {
    check_range(port, &frames)?;
    let tpl = port.make_template(frames.start, &b0)?;
    let mut out = vec![b0];
    let mut prior = b0;
    for f in frames.start + 1..frames.end {
        prior = port.propose(&tpl, f, &prior)?.best().0;
        out.push(prior);
    }
    Ok(out)
}

fn check_range<P: TrackerPort + ?Sized>(port: &P, frames: &Range<usize>) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::EmptyFrames);
    }
    if frames.end > port.num_frames() {
        return Err(Error::FrameOutOfRange { frame: frames.end - 1, len: port.num_frames() });
    }
    Ok(())
}
