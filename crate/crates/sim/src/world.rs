use nbtrack_core::{iou, BBox, Error, RawCandidates, Template, TrackerPort};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::appearance::{cosine, drift_step, mix};
use crate::error::SimResult;
use crate::rng::{stream, CLUTTER, DRIFT, JITTER};
use crate::scene::{ObjectId, Occluder, Scene};

/// What the sensor sees of one object at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectObs {
    pub id: ObjectId,
    pub bbox: BBox,
    /// The box the mock tracker reports, `bbox` plus position noise.
    pub proposal: BBox,
    /// Own appearance after drift.
    pub appearance: Vec<f64>,
    /// Appearance as seen through the active occluder.
    pub effective: Vec<f64>,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameObs {
    pub objects: Vec<ObjectObs>,
    pub clutter: Vec<(BBox, f64)>,
}

/// A scene with every frame's observations precomputed. Implements the
/// tracker contract as a mock appearance tracker: a proposal's score is
/// `visibility * max(0, cos(template, effective appearance))`.
#[derive(Debug, Clone)]
pub struct World {
    scene: Scene,
    frames: Vec<FrameObs>,
}

impl World {
    pub fn new(scene: Scene) -> SimResult<Self> {
        scene.validate()?;
        let n = scene.length;

        // own appearance per object per frame
        let own: Vec<Vec<Vec<f64>>> = scene
            .objects
            .iter()
            .map(|o| {
                let mut seq = Vec::with_capacity(n);
                let mut v = o.appearance.clone();
                for f in 0..n {
                    if f > 0 {
                        let mut rng = stream(scene.seed, &[DRIFT, o.id as u64, f as u64]);
                        v = drift_step(&mut rng, &v, o.drift_at(f));
                    }
                    seq.push(v.clone());
                }
                seq
            })
            .collect();

        let mut frames = Vec::with_capacity(n);
        for f in 0..n {
            let mut obs = FrameObs::default();
            for (k, o) in scene.objects.iter().enumerate() {
                let Some(bbox) = o.trajectory.box_at(f) else { continue };
                let (effective, visibility) = match o.occlusion_at(f) {
                    None => (own[k][f].clone(), 1.0),
                    Some(occ) => {
                        let other = match occ.occluder {
                            Occluder::Static => None,
                            Occluder::Object(id) => scene
                                .objects
                                .iter()
                                .position(|p| p.id == id)
                                .filter(|&j| scene.objects[j].trajectory.box_at(f).is_some())
                                .map(|j| own[j][f].as_slice()),
                        };
                        (mix(&own[k][f], other, occ.severity), 1.0 - occ.severity)
                    }
                };
                let proposal = jittered(&scene, o.id, f, &bbox);
                obs.objects.push(ObjectObs { id: o.id, bbox, proposal, appearance: own[k][f].clone(), effective, visibility });
            }
            obs.clutter = clutter(&scene, f);
            frames.push(obs);
        }
        Ok(Self { scene, frames })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn frame(&self, f: usize) -> &FrameObs {
        &self.frames[f]
    }

    pub fn observe(&self, id: ObjectId, f: usize) -> Option<&ObjectObs> {
        self.frames.get(f)?.objects.iter().find(|o| o.id == id)
    }

    /// Ground-truth box of `id` for every frame.
    pub fn truth(&self, id: ObjectId) -> Vec<Option<BBox>> {
        self.scene.truth(id)
    }

    /// Target box at the first tracked frame.
    pub fn initial_box(&self) -> BBox {
        let f = self.scene.target_frames().start;
        self.observe(self.scene.target, f).expect("target present at its first frame").bbox
    }

    /// Object whose true box overlaps `b` most at frame `f` (lowest id on ties).
    pub fn best_overlap(&self, f: usize, b: &BBox) -> Option<&ObjectObs> {
        let mut best: Option<(&ObjectObs, f64)> = None;
        for o in &self.frames[f].objects {
            let v = iou(&o.bbox, b);
            if v > 0.0 && best.is_none_or(|(p, bv)| v > bv || (v == bv && o.id < p.id)) {
                best = Some((o, v));
            }
        }
        best.map(|(o, _)| o)
    }

    pub fn score(&self, tpl: &Template, o: &ObjectObs) -> f64 {
        (o.visibility * cosine(&tpl.features, &o.effective).max(0.0)).clamp(0.0, 1.0)
    }
}

fn jittered(scene: &Scene, id: ObjectId, f: usize, b: &BBox) -> BBox {
    let s = scene.sensor.jitter;
    if s == 0.0 {
        return *b;
    }
    let mut rng = stream(scene.seed, &[JITTER, id as u64, f as u64]);
    let dx: f64 = rng.sample::<f64, _>(StandardNormal) * s;
    let dy: f64 = rng.sample::<f64, _>(StandardNormal) * s;
    b.translated(dx, dy).unwrap_or(*b)
}

fn clutter(scene: &Scene, f: usize) -> Vec<(BBox, f64)> {
    let k = scene.sensor.clutter;
    if k == 0 {
        return Vec::new();
    }
    let mut rng = stream(scene.seed, &[CLUTTER, f as u64]);
    let (bw, bh) = scene.bounds;
    let sizes: Vec<(f64, f64)> = scene
        .objects
        .iter()
        .filter_map(|o| o.trajectory.box_at(f).map(|b| (b.w(), b.h())))
        .collect();
    (0..k)
        .filter_map(|_| {
            let (w, h) = if sizes.is_empty() { (10.0, 10.0) } else { sizes[rng.gen_range(0..sizes.len())] };
            let cx = rng.gen_range(0.0..bw.max(1.0));
            let cy = rng.gen_range(0.0..bh.max(1.0));
            let score = rng.gen_range(0.0..=scene.sensor.clutter_max_score);
            BBox::from_center(cx, cy, w, h).ok().map(|b| (b, score))
        })
        .collect()
}

impl TrackerPort for World {
    fn num_frames(&self) -> usize {
        self.scene.length
    }

    /// Crops the appearance under `bbox`: the effective appearance of the
    /// best-overlapping object, or nothing if the box covers no object.
    fn make_template(&self, frame: usize, bbox: &BBox) -> nbtrack_core::Result<Template> {
        if frame >= self.scene.length {
            return Err(Error::FrameOutOfRange { frame, len: self.scene.length });
        }
        let features = match self.best_overlap(frame, bbox) {
            Some(o) => o.effective.clone(),
            None => vec![0.0; self.scene.appearance_dim()],
        };
        Ok(Template { source_frame: frame, source_box: *bbox, features })
    }

    /// Every object and clutter box centered within the search radius of
    /// `prior`, nearest first. Falls back to the prior itself at score 0 when
    /// the search region is empty.
    fn propose(&self, tpl: &Template, frame: usize, prior: &BBox) -> nbtrack_core::Result<RawCandidates> {
        if frame >= self.scene.length {
            return Err(Error::FrameOutOfRange { frame, len: self.scene.length });
        }
        let radius = self.scene.sensor.search_radius_scale * prior.diagonal();
        let obs = &self.frames[frame];
        let mut found: Vec<(f64, usize, BBox, f64)> = Vec::new();
        for (k, o) in obs.objects.iter().enumerate() {
            let d = o.bbox.center_distance(prior);
            if d <= radius {
                found.push((d, k, o.proposal, self.score(tpl, o)));
            }
        }
        for (k, (b, s)) in obs.clutter.iter().enumerate() {
            let d = b.center_distance(prior);
            if d <= radius {
                found.push((d, obs.objects.len() + k, *b, *s));
            }
        }
        if found.is_empty() {
            return RawCandidates::new(vec![*prior], vec![0.0]);
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (boxes, scores) = found.into_iter().map(|(_, _, b, s)| (b, s)).unzip();
        RawCandidates::new(boxes, scores)
    }
}
