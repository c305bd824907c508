use std::collections::HashSet;

use nbtrack_core::BBox;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

pub type ObjectId = u32;

/// Where an object is at each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// Piecewise-linear center path through `(frame, cx, cy)` points, held
    /// constant before the first and after the last point.
    Waypoints { size: (f64, f64), points: Vec<(usize, f64, f64)> },
    /// Linear drift plus a sinusoidal wobble on each axis.
    Sinusoid { size: (f64, f64), start: (f64, f64), velocity: (f64, f64), amplitude: (f64, f64), period: f64, phase: f64 },
    /// Explicit boxes for consecutive frames; the object is absent elsewhere.
    Track { first_frame: usize, boxes: Vec<BBox> },
}

impl Trajectory {
    pub fn box_at(&self, frame: usize) -> Option<BBox> {
        match self {
            Trajectory::Waypoints { size, points } => {
                let (cx, cy) = interpolate(points, frame as f64);
                BBox::from_center(cx, cy, size.0, size.1).ok()
            }
            Trajectory::Sinusoid { size, start, velocity, amplitude, period, phase } => {
                let f = frame as f64;
                let a = std::f64::consts::TAU * f / period + phase;
                let cx = start.0 + velocity.0 * f + amplitude.0 * a.sin();
                let cy = start.1 + velocity.1 * f + amplitude.1 * a.cos();
                BBox::from_center(cx, cy, size.0, size.1).ok()
            }
            Trajectory::Track { first_frame, boxes } => {
                frame.checked_sub(*first_frame).and_then(|i| boxes.get(i)).copied()
            }
        }
    }

    fn validate(&self) -> SimResult<()> {
        match self {
            Trajectory::Waypoints { size, points } => {
                positive_size(*size)?;
                if points.is_empty() {
                    return Err(SimError::config("waypoint trajectory needs at least one point"));
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(SimError::config("waypoint frames must be strictly increasing"));
                }
                if points.iter().any(|p| !(p.1.is_finite() && p.2.is_finite())) {
                    return Err(SimError::config("waypoint coordinates must be finite"));
                }
                Ok(())
            }
            Trajectory::Sinusoid { size, start, velocity, amplitude, period, phase } => {
                positive_size(*size)?;
                let all = [start.0, start.1, velocity.0, velocity.1, amplitude.0, amplitude.1, *phase];
                if all.iter().any(|v| !v.is_finite()) || !(*period > 0.0) {
                    return Err(SimError::config("sinusoid parameters must be finite with a positive period"));
                }
                Ok(())
            }
            Trajectory::Track { boxes, .. } => {
                if boxes.is_empty() {
                    return Err(SimError::config("track trajectory has no boxes"));
                }
                Ok(())
            }
        }
    }
}

fn positive_size(size: (f64, f64)) -> SimResult<()> {
    if size.0 > 0.0 && size.1 > 0.0 && size.0.is_finite() && size.1.is_finite() {
        Ok(())
    } else {
        Err(SimError::config(format!("object size {size:?} must be positive")))
    }
}

fn interpolate(points: &[(usize, f64, f64)], f: f64) -> (f64, f64) {
    let first = points[0];
    let last = points[points.len() - 1];
    if f <= first.0 as f64 {
        return (first.1, first.2);
    }
    if f >= last.0 as f64 {
        return (last.1, last.2);
    }
    let i = points.partition_point(|p| (p.0 as f64) <= f);
    let (a, b) = (points[i - 1], points[i]);
    let s = (f - a.0 as f64) / (b.0 - a.0) as f64;
    (a.1 + s * (b.1 - a.1), a.2 + s * (b.2 - a.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occluder {
    /// Scenery: contributes no appearance of its own.
    Static,
    Object(ObjectId),
}

/// The object is covered over `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    pub start: usize,
    pub end: usize,
    pub occluder: Occluder,
    /// 1 hides the object completely.
    pub severity: f64,
}

impl Occlusion {
    pub fn covers(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }
}

/// A window with a different appearance drift rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpike {
    pub start: usize,
    pub end: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub trajectory: Trajectory,
    /// Unit vector at frame 0.
    pub appearance: Vec<f64>,
    /// Per-frame step of the appearance random walk.
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub drift_spikes: Vec<DriftSpike>,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
}

impl ObjectSpec {
    pub fn drift_at(&self, frame: usize) -> f64 {
        self.drift_spikes
            .iter()
            .filter(|s| s.start <= frame && frame <= s.end)
            .map(|s| s.rate)
            .fold(self.drift, f64::max)
    }

    /// Strongest occlusion active at `frame` (earliest listed on ties).
    pub fn occlusion_at(&self, frame: usize) -> Option<&Occlusion> {
        let mut best: Option<&Occlusion> = None;
        for o in self.occlusions.iter().filter(|o| o.covers(frame)) {
            if best.is_none_or(|b| o.severity > b.severity) {
                best = Some(o);
            }
        }
        best
    }

    pub fn visibility(&self, frame: usize) -> f64 {
        1.0 - self.occlusion_at(frame).map_or(0.0, |o| o.severity)
    }
}

/// How the mock tracker perceives the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    /// Standard deviation of proposal position noise, pixels.
    pub jitter: f64,
    /// Low-score distractor boxes per frame.
    pub clutter: usize,
    pub clutter_max_score: f64,
    /// Search radius as a multiple of the prior box diagonal.
    pub search_radius_scale: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { jitter: 0.0, clutter: 0, clutter_max_score: 0.3, search_radius_scale: 2.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub length: usize,
    pub bounds: (f64, f64),
    pub seed: u64,
    /// The object the tracker is initialized on.
    pub target: ObjectId,
    #[serde(default)]
    pub sensor: SensorModel,
    pub objects: Vec<ObjectSpec>,
}

impl Scene {
    pub fn object(&self, id: ObjectId) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn target_spec(&self) -> &ObjectSpec {
        self.object(self.target).expect("validated scene has its target")
    }

    /// Ground-truth boxes of `id`, `None` where it is absent.
    pub fn truth(&self, id: ObjectId) -> Vec<Option<BBox>> {
        match self.object(id) {
            Some(o) => (0..self.length).map(|f| o.trajectory.box_at(f)).collect(),
            None => vec![None; self.length],
        }
    }

    /// Frames over which the target is tracked: from its first appearance
    /// up to (not including) its first absence afterwards.
    pub fn target_frames(&self) -> std::ops::Range<usize> {
        let t = &self.target_spec().trajectory;
        let Some(start) = (0..self.length).find(|&f| t.box_at(f).is_some()) else { return 0..0 };
        let end = (start..self.length).find(|&f| t.box_at(f).is_none()).unwrap_or(self.length);
        start..end
    }

    pub fn appearance_dim(&self) -> usize {
        self.objects.first().map_or(0, |o| o.appearance.len())
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.length == 0 {
            return Err(SimError::config("scene length must be positive"));
        }
        if self.objects.is_empty() {
            return Err(SimError::config("scene has no objects"));
        }
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return Err(SimError::config(format!("duplicate object id {}", o.id)));
            }
        }
        if !ids.contains(&self.target) {
            return Err(SimError::config(format!("target id {} is not in the scene", self.target)));
        }
        let s = &self.sensor;
        if !(s.jitter >= 0.0 && s.search_radius_scale > 0.0 && (0.0..=1.0).contains(&s.clutter_max_score)) {
            return Err(SimError::config("sensor parameters out of range"));
        }
        let dim = self.appearance_dim();
        for o in &self.objects {
            o.trajectory.validate()?;
            if o.appearance.len() != dim || dim == 0 {
                return Err(SimError::config(format!("object {} appearance has the wrong dimension", o.id)));
            }
            let norm = o.appearance.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(SimError::config(format!("object {} appearance is not a unit vector", o.id)));
            }
            if !(o.drift >= 0.0) || o.drift_spikes.iter().any(|d| !(d.rate >= 0.0) || d.start > d.end) {
                return Err(SimError::config(format!("object {} has an invalid drift", o.id)));
            }
            for occ in &o.occlusions {
                if occ.start > occ.end || !(0.0..=1.0).contains(&occ.severity) {
                    return Err(SimError::config(format!("object {} has an invalid occlusion", o.id)));
                }
                if let Occluder::Object(by) = occ.occluder {
                    if by == o.id || !ids.contains(&by) {
                        return Err(SimError::config(format!("object {} occluded by unknown object {by}", o.id)));
                    }
                }
            }
        }
        if self.target_frames().is_empty() {
            return Err(SimError::config("target never appears in the scene"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> SimResult<Self> {
        let scene: Scene = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoints_interpolate_and_clamp() {
        let t = Trajectory::Waypoints { size: (10.0, 20.0), points: vec![(2, 0.0, 0.0), (6, 8.0, 4.0)] };
        assert_eq!(t.box_at(0).unwrap().center(), (0.0, 0.0));
        assert_eq!(t.box_at(4).unwrap().center(), (4.0, 2.0));
        assert_eq!(t.box_at(9).unwrap().center(), (8.0, 4.0));
    }

    #[test]
    fn track_is_absent_outside_span() {
        let b = BBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let t = Trajectory::Track { first_frame: 3, boxes: vec![b, b] };
        assert_eq!(t.box_at(2), None);
        assert_eq!(t.box_at(3), Some(b));
        assert_eq!(t.box_at(5), None);
    }

    #[test]
    fn visibility_uses_strongest_occlusion() {
        let o = ObjectSpec {
            id: 1,
            trajectory: Trajectory::Waypoints { size: (1.0, 1.0), points: vec![(0, 0.0, 0.0)] },
            appearance: vec![1.0],
            drift: 0.0,
            drift_spikes: vec![],
            occlusions: vec![
                Occlusion { start: 2, end: 5, occluder: Occluder::Static, severity: 0.3 },
                Occlusion { start: 4, end: 8, occluder: Occluder::Static, severity: 0.9 },
            ],
        };
        assert_eq!(o.visibility(0), 1.0);
        assert!((o.visibility(3) - 0.7).abs() < 1e-12);
        assert!((o.visibility(5) - 0.1).abs() < 1e-12);
        assert_eq!(o.visibility(9), 1.0);
    }
}
