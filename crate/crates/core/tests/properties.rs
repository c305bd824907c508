use nbtrack_core::matching::{build_weights, hungarian_max, resolve_target, Selection, WeightMatrix};
use nbtrack_core::pools::{update_neighbor_pool, CandidatePool, NeighborPool, PoolEntry};
use nbtrack_core::select::{assemble, filter_by_confidence, soft_nms};
use nbtrack_core::{iou, tracklet_avg_iou, BBox, MotionConfig, MotionState, RawCandidates, Tracklet};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BBox> {
    (-50.0..50.0f64, -50.0..50.0f64, 1.0..40.0f64, 1.0..40.0f64).prop_map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap())
}

/// Overlap computed from scratch on corner coordinates.
fn iou_oracle(a: &BBox, b: &BBox) -> f64 {
    let (ax2, ay2, bx2, by2) = (a.x() + a.w(), a.y() + a.h(), b.x() + b.w(), b.y() + b.h());
    let iw = (ax2.min(bx2) - a.x().max(b.x())).max(0.0);
    let ih = (ay2.min(by2) - a.y().max(b.y())).max(0.0);
    let inter = iw * ih;
    inter / (a.w() * a.h() + b.w() * b.h() - inter)
}

fn brute_force_max(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    // assign each row to a distinct column or to nothing
    fn go(r: usize, rows: &[Vec<f64>], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if r == rows.len() {
            *best = best.max(acc);
            return;
        }
        go(r + 1, rows, used, acc, best);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                go(r + 1, rows, used, acc + rows[r][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = 0.0;
    if n > 0 {
        go(0, rows, &mut vec![false; m], 0.0, &mut best);
    }
    best
}

proptest! {
    #[test]
    fn iou_matches_oracle_and_is_symmetric(a in bbox(), b in bbox()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((v - iou_oracle(&a, &b)).abs() < 1e-9);
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_is_translation_invariant(a in bbox(), b in bbox(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let v = iou(&a, &b);
        let w = iou(&a.translated(dx, dy).unwrap(), &b.translated(dx, dy).unwrap());
        prop_assert!((v - w).abs() < 1e-9);
    }

    #[test]
    fn avg_iou_matches_per_frame_oracle(p in prop::collection::vec(bbox(), 1..12), q in prop::collection::vec(bbox(), 1..12), end in 20usize..30) {
        let tp = Tracklet::new(end, p.clone()).unwrap();
        let tq = Tracklet::new(end, q.clone()).unwrap();
        let v = tracklet_avg_iou(&tp, &tq).unwrap();
        let n = p.len().min(q.len());
        let oracle = (0..n).map(|k| {
            let f = end - k;
            iou_oracle(tp.box_at(f).unwrap(), tq.box_at(f).unwrap())
        }).sum::<f64>() / n as f64;
        prop_assert!((v - oracle).abs() < 1e-9);
        prop_assert_eq!(v, tracklet_avg_iou(&tq, &tp).unwrap());
    }

    #[test]
    fn filter_keeps_argmax_and_only_confident_boxes(
        items in prop::collection::vec((bbox(), 0.0..1.0f64), 1..10),
        alpha in 0.0..=1.0f64,
    ) {
        let (boxes, scores): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        let raw = RawCandidates::new(boxes, scores).unwrap();
        let f = filter_by_confidence(&raw, alpha).unwrap();
        let best = raw.scores()[raw.argmax()];
        prop_assert!(!f.is_empty() && f.len() <= raw.len());
        prop_assert!(f.scores().contains(&best));
        for (b, s) in f.iter() {
            prop_assert!(s > alpha * best || s == best);
            prop_assert!(raw.boxes().contains(b));
        }
    }

    #[test]
    fn soft_nms_only_decays(items in prop::collection::vec((bbox(), 0.01..1.0f64), 1..10)) {
        let (boxes, scores): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        let raw = RawCandidates::new(boxes, scores).unwrap();
        let kept = soft_nms(&raw, 0.25, 0.01, 1e-3).unwrap();
        prop_assert!(!kept.is_empty());
        // the best box always survives with its score and comes first
        prop_assert_eq!(kept.scores()[0], raw.scores()[raw.argmax()]);
        for (b, s) in kept.iter() {
            let i = raw.boxes().iter().position(|r| r == b).unwrap();
            prop_assert!(s <= raw.scores()[i]);
            prop_assert!(s >= 1e-3 || s == raw.scores()[i]);
        }
    }

    #[test]
    fn covariance_stays_psd(
        start in bbox(),
        moves in prop::collection::vec((any::<bool>(), -10.0..10.0f64, -10.0..10.0f64, 0.5..2.0f64), 1..40),
    ) {
        let cfg = MotionConfig::default();
        let mut s = MotionState::init(&start, 0, &cfg);
        let mut b = start;
        for (observe, dx, dy, scale) in moves {
            let (_, p) = s.predict(&cfg);
            s = p;
            if observe {
                b = BBox::new(b.x() + dx, b.y() + dy, (b.w() * scale).clamp(1.0, 200.0), (b.h() * scale).clamp(1.0, 200.0)).unwrap();
                s = s.update(&b, &cfg);
            }
            prop_assert!(s.min_eigenvalue() >= -1e-9);
            let c = &s.covariance;
            prop_assert!((c - c.transpose()).abs().max() < 1e-9);
            let pred = s.bbox(&cfg);
            prop_assert!(pred.w() > 0.0 && pred.h() > 0.0);
        }
    }

    #[test]
    fn neighbor_update_shifts_every_unselected_tracklet(
        lens in prop::collection::vec(1usize..12, 1..6),
        tau in 1usize..12,
        pick in 0usize..6,
    ) {
        let t = 20;
        let entries: Vec<PoolEntry> = lens.iter().enumerate().map(|(i, &l)| {
            let l = l.min(tau);
            let boxes = (0..l).map(|k| BBox::new(i as f64 * 100.0 + k as f64, 0.0, 10.0, 10.0).unwrap()).collect();
            PoolEntry { index: i, bbox: BBox::new(i as f64 * 100.0 - 1.0, 0.0, 10.0, 10.0).unwrap(), tracklet: Tracklet::new(t - 1, boxes).unwrap() }
        }).collect();
        let pool = CandidatePool { frame: t, entries: entries.clone() };
        let selected = pick % entries.len();
        let n = update_neighbor_pool(&pool, selected, tau).unwrap();
        prop_assert_eq!(n.len(), entries.len() - 1);
        for (z, e) in n.entries.iter().zip(entries.iter().filter(|e| e.index != selected)) {
            prop_assert_eq!(z.end_frame(), t);
            prop_assert_eq!(z.head(), &e.bbox);
            prop_assert_eq!(z.len(), (e.tracklet.len() + 1).min(tau));
            for k in 1..z.len() {
                prop_assert_eq!(&z.boxes()[k], &e.tracklet.boxes()[k - 1]);
            }
        }
    }

    #[test]
    fn hungarian_matches_brute_force(
        dims in (1usize..=5, 1usize..=5),
        seed in prop::collection::vec(0u32..=256, 25),
    ) {
        let (n, m) = dims;
        let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..m).map(|c| seed[r * 5 + c] as f64 / 256.0).collect()).collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let a = hungarian_max(&w);
        prop_assert_eq!(a.total_weight, brute_force_max(&rows));
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), a.pairs.len());
    }
}

#[test]
fn weights_are_average_tracklet_iou() {
    let b = |x: f64| BBox::new(x, 0.0, 10.0, 10.0).unwrap();
    let target = Tracklet::new(9, vec![b(0.0), b(0.0)]).unwrap();
    let neighbor = Tracklet::new(9, vec![b(50.0), b(50.0)]).unwrap();
    let entry = |i: usize, x: f64| PoolEntry { index: i, bbox: b(x), tracklet: Tracklet::new(9, vec![b(x), b(x)]).unwrap() };
    let pool = CandidatePool { frame: 10, entries: vec![entry(0, 5.0), entry(1, 50.0)] };
    let w = build_weights(&pool, &NeighborPool { entries: vec![neighbor] }, &target).unwrap();
    assert_eq!(w.rows(), 2);
    assert_eq!(w.cols(), 2);
    assert!((w.get(0, 1) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(w.get(1, 0), 1.0);
    assert_eq!(w.get(0, 0), 0.0);

    let raw = RawCandidates::new(vec![b(5.0), b(50.0)], vec![0.9, 0.8]).unwrap();
    let cands = assemble(&raw, None);
    let a = hungarian_max(&w);
    assert_eq!(resolve_target(&a, &w, &cands).unwrap(), (0, Selection::Matched));
}
