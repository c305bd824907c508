//! Candidate tracklet pool (one backward tracklet per candidate) and the
//! neighbor pool carried over to the next frame.

use crate::error::{Error, Result};
use crate::geometry::{BBox, Tracklet};
use crate::port::{backtrack_frames, TrackerPort};
use crate::select::CandidateSet;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub index: usize,
    pub bbox: BBox,
    /// Backward tracklet over `[t-1, t-min(tau, t)]`.
    pub tracklet: Tracklet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub frame: usize,
    pub entries: Vec<PoolEntry>,
}

/// Tracklets of the unselected candidates of the previous frame, aligned so
/// they end at the frame the engine last produced a result for.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborPool {
    pub entries: Vec<Tracklet>,
}

impl NeighborPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Backtracks one candidate: template cropped at its box in frame `t`, the
/// same box seeding the search.
pub fn backtrack<P: TrackerPort + ?Sized>(port: &P, t: usize, b: &BBox, tau: usize) -> Result<Tracklet> {
    let tpl = port.make_template(t, b)?;
    port.track_segment(&tpl, b, &backtrack_frames(t, tau))
}

/// Backtracks every candidate of frame `t` for `min(tau, t)` frames.
/// `reuse` supplies an already computed tracklet for one candidate index.
pub fn build_candidate_pool<P: TrackerPort + ?Sized>(
    cands: &CandidateSet,
    port: &P,
    t: usize,
    tau: usize,
    reuse: Option<(usize, &Tracklet)>,
) -> Result<CandidatePool> {
    if t == 0 {
        return Err(Error::InvalidParameter { name: "frame", reason: "backtracking needs t >= 1".into() });
    }
    if cands.is_empty() {
        return Err(Error::NoCandidates);
    }
    let entries = cands
        .boxes()
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let tracklet = match reuse {
                Some((i, tr)) if i == index => tr.clone(),
                _ => backtrack(port, t, b, tau)?,
            };
            Ok(PoolEntry { index, bbox: *b, tracklet })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidatePool { frame: t, entries })
}

/// Drops the selected entry and shifts every other tracklet forward one
/// frame: its frame-`t` box goes in front and, once the tracklet is `tau`
/// long, the oldest box falls off.
pub fn update_neighbor_pool(pool: &CandidatePool, selected: usize, tau: usize) -> Result<NeighborPool> {
    if selected >= pool.entries.len() {
        return Err(Error::IndexOutOfRange { index: selected, len: pool.entries.len() });
    }
    let entries = pool
        .entries
        .iter()
        .filter(|e| e.index != selected)
        .map(|e| {
            let mut tr = e.tracklet.clone();
            tr.prepend(e.bbox, tau);
            tr
        })
        .collect();
    Ok(NeighborPool { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::port::{RawCandidates, Template};
    use crate::select::assemble;

    /// Every object moves 2 px/frame to the right in its own lane; proposals
    /// return only the object the template was cropped from.
    struct Lanes {
        lanes: usize,
    }

    fn lane_box(lane: usize, frame: usize) -> BBox {
        BBox::new(2.0 * frame as f64, 50.0 * lane as f64, 10.0, 10.0).unwrap()
    }

    impl TrackerPort for Lanes {
        fn num_frames(&self) -> usize {
            100
        }

        fn make_template(&self, frame: usize, bbox: &BBox) -> Result<Template> {
            let lane = (bbox.y() / 50.0).round();
            Ok(Template { source_frame: frame, source_box: *bbox, features: vec![lane] })
        }

        fn propose(&self, tpl: &Template, frame: usize, _prior: &BBox) -> Result<RawCandidates> {
            let lane = (tpl.features[0] as usize).min(self.lanes - 1);
            RawCandidates::new(vec![lane_box(lane, frame)], vec![1.0])
        }
    }

    fn cand_set(t: usize, lanes: usize) -> CandidateSet {
        let boxes = (0..lanes).map(|l| lane_box(l, t)).collect();
        let scores = vec![0.9; lanes];
        assemble(&RawCandidates::new(boxes, scores).unwrap(), None)
    }

    #[test]
    fn pool_at_first_frame_has_length_one_tracklets() {
        let port = Lanes { lanes: 1 };
        let pool = build_candidate_pool(&cand_set(1, 1), &port, 1, 9, None).unwrap();
        assert_eq!(pool.entries[0].tracklet.len(), 1);
        assert_eq!(pool.entries[0].tracklet.end_frame(), 0);
    }

    #[test]
    fn pool_is_index_aligned_and_follows_history() {
        let port = Lanes { lanes: 3 };
        let pool = build_candidate_pool(&cand_set(20, 3), &port, 20, 9, None).unwrap();
        assert_eq!(pool.entries.len(), 3);
        for (i, e) in pool.entries.iter().enumerate() {
            assert_eq!(e.index, i);
            assert_eq!(e.tracklet.len(), 9);
            for f in 11..20 {
                assert_eq!(e.tracklet.box_at(f), Some(&lane_box(i, f)));
            }
        }
    }

    #[test]
    fn pool_reuses_supplied_tracklet() {
        let port = Lanes { lanes: 2 };
        let marker = Tracklet::single(19, lane_box(1, 0));
        let pool = build_candidate_pool(&cand_set(20, 2), &port, 20, 9, Some((0, &marker))).unwrap();
        assert_eq!(pool.entries[0].tracklet, marker);
        assert_ne!(pool.entries[1].tracklet, marker);
    }

    #[test]
    fn neighbor_update_shifts_by_one_frame() {
        let port = Lanes { lanes: 2 };
        let pool = build_candidate_pool(&cand_set(20, 2), &port, 20, 9, None).unwrap();
        let n = update_neighbor_pool(&pool, 0, 9).unwrap();
        assert_eq!(n.len(), 1);
        let z = &n.entries[0];
        assert_eq!(z.end_frame(), 20);
        assert_eq!(z.len(), 9);
        // (b_t, b_{t-1}, ..., b_{t-8})
        let expect: Vec<BBox> = (12..=20).rev().map(|f| lane_box(1, f)).collect();
        assert_eq!(z.boxes(), &expect[..]);
    }

    #[test]
    fn neighbor_update_grows_short_tracklets() {
        let port = Lanes { lanes: 2 };
        let pool = build_candidate_pool(&cand_set(3, 2), &port, 3, 9, None).unwrap();
        let n = update_neighbor_pool(&pool, 1, 9).unwrap();
        assert_eq!(n.entries[0].len(), 4);
        assert_eq!(n.entries[0].end_frame(), 3);
    }

    #[test]
    fn selecting_the_only_entry_empties_the_pool() {
        let port = Lanes { lanes: 1 };
        let pool = build_candidate_pool(&cand_set(5, 1), &port, 5, 9, None).unwrap();
        assert!(update_neighbor_pool(&pool, 0, 9).unwrap().is_empty());
        assert!(update_neighbor_pool(&pool, 1, 9).is_err());
    }
}
