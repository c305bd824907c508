use nbtrack_core::matching::Selection;
use nbtrack_core::{
    iou, run_baseline, run_sequence, BBox, Engine, EngineConfig, Fallback, Gate, RawCandidates, Template, TrackerPort,
};
use proptest::prelude::*;

type CoreResult<T> = nbtrack_core::error::Result<T>;

fn tpl(frame: usize, b: &BBox) -> Template {
    Template { source_frame: frame, source_box: *b, features: vec![] }
}

/// A 10 px object moving 30 px per frame over frames 0..5; afterwards only
/// two far-away distractors are proposed. Templates cut at frame 5 or later
/// see nothing in the earlier frames, so every backward tracklet just repeats
/// its start box and has no overlap with the target history.
struct Vanish;

const VANISH_AT: usize = 5;

impl Vanish {
    fn object(f: usize) -> BBox {
        BBox::new(30.0 * f as f64, 0.0, 10.0, 10.0).unwrap()
    }
    fn distractors() -> (BBox, BBox) {
        (BBox::new(600.0, 600.0, 10.0, 10.0).unwrap(), BBox::new(900.0, 100.0, 10.0, 10.0).unwrap())
    }
}

impl TrackerPort for Vanish {
    fn num_frames(&self) -> usize {
        10
    }

    fn make_template(&self, frame: usize, bbox: &BBox) -> CoreResult<Template> {
        Ok(tpl(frame, bbox))
    }

    fn propose(&self, t: &Template, frame: usize, prior: &BBox) -> CoreResult<RawCandidates> {
        if frame >= VANISH_AT {
            let (d1, d2) = Self::distractors();
            return RawCandidates::new(vec![d1, d2], vec![0.9, 0.8]);
        }
        if t.source_frame >= VANISH_AT {
            return RawCandidates::new(vec![*prior], vec![0.0]);
        }
        RawCandidates::new(vec![Self::object(frame)], vec![1.0])
    }
}

#[test]
fn zero_overlap_history_falls_back_to_motion_prediction() {
    let cfg = EngineConfig::default();
    let run = run_sequence(&Vanish, 0..VANISH_AT + 1, Vanish::object(0), cfg).unwrap();
    for r in &run.log[..VANISH_AT - 1] {
        assert_eq!(r.gate, Gate::Stable);
        assert!(!r.selected_kalman);
    }
    let last = run.log.last().unwrap();
    assert_eq!(last.frame, VANISH_AT);
    assert_eq!(last.gate, Gate::Unstable);
    assert_eq!(last.selection, Some(Selection::KalmanFallback));
    assert!(last.selected_kalman);
    assert_eq!(last.fallback, None);
    // the predicted box continues the motion
    let out = run.boxes.last().unwrap();
    assert!((out.center().0 - 30.0 * VANISH_AT as f64 - 5.0).abs() < 15.0, "{out:?}");
}

#[test]
fn zero_overlap_history_without_kalman_degrades_to_argmax() {
    let cfg = EngineConfig { kalman: false, ..EngineConfig::default() };
    let run = run_sequence(&Vanish, 0..VANISH_AT + 1, Vanish::object(0), cfg).unwrap();
    let last = run.log.last().unwrap();
    assert_eq!(last.gate, Gate::Unstable);
    assert_eq!(last.selection, None);
    assert_eq!(last.fallback, Some(Fallback::DegradedArgmax));
    assert_eq!(*run.boxes.last().unwrap(), Vanish::distractors().0);
}

/// Several objects on straight lines with pseudo-random scores that
/// ignore the template.
#[derive(Debug, Clone)]
struct Lines {
    seed: u64,
    objects: Vec<(f64, f64, f64, f64)>,
    frames: usize,
}

impl Lines {
    fn at(&self, i: usize, f: usize) -> BBox {
        let (x, y, vx, vy) = self.objects[i];
        BBox::new(x + vx * f as f64, y + vy * f as f64, 12.0, 24.0).unwrap()
    }

    fn noise(&self, i: usize, f: usize) -> f64 {
        let mut z = self.seed ^ ((i as u64) << 32) ^ f as u64;
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl TrackerPort for Lines {
    fn num_frames(&self) -> usize {
        self.frames
    }

    fn make_template(&self, frame: usize, bbox: &BBox) -> CoreResult<Template> {
        Ok(tpl(frame, bbox))
    }

    fn propose(&self, _t: &Template, frame: usize, prior: &BBox) -> CoreResult<RawCandidates> {
        let mut boxes = vec![];
        let mut scores = vec![];
        for i in 0..self.objects.len() {
            let b = self.at(i, frame);
            if b.center_distance(prior) <= 3.0 * prior.diagonal() {
                boxes.push(b);
                scores.push(0.5 + 0.5 * self.noise(i, frame));
            }
        }
        if boxes.is_empty() {
            return RawCandidates::new(vec![*prior], vec![0.0]);
        }
        RawCandidates::new(boxes, scores)
    }
}

fn lines() -> impl Strategy<Value = Lines> {
    let obj = (0.0..200.0f64, 0.0..200.0f64, -4.0..4.0f64, -4.0..4.0f64);
    (any::<u64>(), prop::collection::vec(obj, 1..5), 2usize..30).prop_map(|(seed, objects, frames)| Lines {
        seed,
        objects,
        frames,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_output_is_one_of_the_frame_candidates(port in lines(), tau in 1usize..12, kalman in any::<bool>()) {
        let cfg = EngineConfig { tau, kalman, ..EngineConfig::default() };
        let b0 = port.at(0, 0);
        let mut engine = Engine::init(&port, 0, b0, cfg).unwrap();
        for f in 1..port.frames {
            let st = engine.state();
            let raw = port.propose(&st.template, f, st.last_box()).unwrap();
            let kalman_box = st.motion.predict(&cfg.motion).0;
            let (out, rec) = engine.step(&port, f).unwrap();
            let from_raw = raw.boxes().contains(&out);
            prop_assert!(from_raw || (kalman && out == kalman_box));
            prop_assert_eq!(rec.selected_kalman, !from_raw || rec.kalman_index == Some(rec.selected));
            prop_assert!(rec.selected < rec.candidates);
            prop_assert!(engine.state().target.len() <= tau);
            prop_assert!(engine.state().neighbors.entries.iter().all(|n| n.len() <= tau && n.end_frame() == f));
        }
    }

    #[test]
    fn gate_decisions_follow_the_rule(port in lines(), kalman in any::<bool>()) {
        let cfg = EngineConfig { kalman, ..EngineConfig::default() };
        let run = run_sequence(&port, 0..port.frames, port.at(0, 0), cfg).unwrap();
        for r in &run.log {
            match r.gate {
                Gate::Single => {
                    prop_assert_eq!(r.candidates, 1);
                    prop_assert!(r.top_avg_iou.is_none());
                }
                Gate::Stable => {
                    prop_assert!(r.top_avg_iou.unwrap() > cfg.gate_iou);
                    prop_assert_eq!(r.selected, r.top);
                }
                Gate::Unstable => {
                    prop_assert!(r.candidates > 1);
                    prop_assert!(r.top_avg_iou.unwrap() <= cfg.gate_iou);
                    prop_assert!(r.weights.is_some());
                    prop_assert!(r.selection.is_some() != r.fallback.is_some());
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic(port in lines()) {
        let cfg = EngineConfig::default();
        let a = run_sequence(&port, 0..port.frames, port.at(0, 0), cfg).unwrap();
        let b = run_sequence(&port, 0..port.frames, port.at(0, 0), cfg).unwrap();
        prop_assert_eq!(serde_json::to_string(&a.log).unwrap(), serde_json::to_string(&b.log).unwrap());
        prop_assert_eq!(a.boxes, b.boxes);
    }
}

#[test]
fn lone_object_is_tracked_like_the_baseline() {
    let port = Lines { seed: 3, objects: vec![(10.0, 10.0, 2.0, 1.0)], frames: 40 };
    let cfg = EngineConfig { kalman: false, ..EngineConfig::default() };
    let run = run_sequence(&port, 0..40, port.at(0, 0), cfg).unwrap();
    let base = run_baseline(&port, 0..40, port.at(0, 0)).unwrap();
    assert_eq!(run.boxes, base);
    assert!(run.log.iter().all(|r| r.gate == Gate::Single));
    for (f, b) in run.boxes.iter().enumerate() {
        assert_eq!(iou(b, &port.at(0, f)), 1.0);
    }
}

#[test]
fn resuming_from_saved_state_matches() {
    let port = Lines { seed: 9, objects: vec![(10.0, 10.0, 2.0, 1.0), (40.0, 10.0, -2.0, 1.0)], frames: 30 };
    let cfg = EngineConfig::default();
    let mut a = Engine::init(&port, 0, port.at(0, 0), cfg).unwrap();
    for f in 1..15 {
        a.step(&port, f).unwrap();
    }
    let mut b = Engine::from_state(a.state().clone());
    for f in 15..30 {
        let (x, rx) = a.step(&port, f).unwrap();
        let (y, ry) = b.step(&port, f).unwrap();
        assert_eq!(x, y);
        assert_eq!(rx.gate, ry.gate);
    }
}
