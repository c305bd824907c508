//! Candidate-set construction: confidence-ratio filtering, Gaussian
//! soft-NMS, and injection of the motion-predicted box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::port::RawCandidates;

/// Candidates considered for the current frame. Appearance-ranked boxes come
/// first, in descending score order; the motion-predicted box, when present,
/// is last and carries a score of zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    boxes: Vec<BBox>,
    scores: Vec<f64>,
    kalman_index: Option<usize>,
}

impl CandidateSet {
    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn kalman_index(&self) -> Option<usize> {
        self.kalman_index
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn is_kalman(&self, i: usize) -> bool {
        self.kalman_index == Some(i)
    }

    /// Highest-confidence appearance candidate (ties: lowest index).
    pub fn top(&self) -> usize {
        let mut best: Option<usize> = None;
        for i in 0..self.boxes.len() {
            if self.is_kalman(i) {
                continue;
            }
            match best {
                Some(b) if self.scores[i] <= self.scores[b] => {}
                _ => best = Some(i),
            }
        }
        best.unwrap_or(0)
    }
}

/// Keeps the boxes scoring strictly above `alpha` times the best score. The
/// best box itself always survives, even when every score is zero.
pub fn filter_by_confidence(raw: &RawCandidates, alpha: f64) -> Result<RawCandidates> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} not in [0, 1]") });
    }
    let best = raw.argmax();
    let threshold = alpha * raw.scores()[best];
    let (boxes, scores): (Vec<_>, Vec<_>) = raw
        .iter()
        .enumerate()
        .filter(|&(i, (_, s))| i == best || s > threshold)
        .map(|(_, (b, s))| (*b, s))
        .unzip();
    RawCandidates::new(boxes, scores)
}

/// Greedy Gaussian soft-NMS. The highest remaining box is kept; every other
/// remaining box overlapping it by more than `iou_thresh` has its score
/// multiplied by `exp(-iou^2 / sigma)` and is dropped if the decayed score
/// falls below `score_floor`. Output is in selection (descending score) order.
pub fn soft_nms(cands: &RawCandidates, iou_thresh: f64, sigma: f64, score_floor: f64) -> Result<RawCandidates> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter { name: "nms_sigma", reason: format!("{sigma} must be positive") });
    }
    if !(0.0..=1.0).contains(&iou_thresh) {
        return Err(Error::InvalidParameter { name: "nms_iou", reason: format!("{iou_thresh} not in [0, 1]") });
    }
    if !(0.0..=1.0).contains(&score_floor) {
        return Err(Error::InvalidParameter { name: "nms_floor", reason: format!("{score_floor} not in [0, 1]") });
    }

    let mut pending: Vec<(BBox, f64)> = cands.iter().map(|(b, s)| (*b, s)).collect();
    let mut kept_boxes = Vec::with_capacity(pending.len());
    let mut kept_scores = Vec::with_capacity(pending.len());

    while !pending.is_empty() {
        let mut best = 0;
        for i in 1..pending.len() {
            if pending[i].1 > pending[best].1 {
                best = i;
            }
        }
        let (kb, ks) = pending.remove(best);
        kept_boxes.push(kb);
        kept_scores.push(ks);

        pending.retain_mut(|(b, s)| {
            let o = iou(&kb, b);
            if o <= iou_thresh {
                return true;
            }
            *s *= (-(o * o) / sigma).exp();
            *s >= score_floor
        });
    }
    RawCandidates::new(kept_boxes, kept_scores)
}

/// Builds the candidate set from the suppressed proposals, appending the
/// motion-predicted box when one is given.
pub fn assemble(filtered: &RawCandidates, kalman_box: Option<BBox>) -> CandidateSet {
    let mut boxes = filtered.boxes().to_vec();
    let mut scores = filtered.scores().to_vec();
    let kalman_index = kalman_box.map(|k| {
        boxes.push(k);
        scores.push(0.0);
        boxes.len() - 1
    });
    CandidateSet { boxes, scores, kalman_index }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(items: &[(f64, f64, f64)]) -> RawCandidates {
        // (x offset, width, score), all boxes 10 high at y = 0
        let boxes = items.iter().map(|&(x, w, _)| BBox::new(x, 0.0, w, 10.0).unwrap()).collect();
        let scores = items.iter().map(|&(_, _, s)| s).collect();
        RawCandidates::new(boxes, scores).unwrap()
    }

    #[test]
    fn ratio_filter_keeps_scores_above_threshold() {
        let r = raw(&[(0.0, 5.0, 0.9), (20.0, 5.0, 0.7), (40.0, 5.0, 0.5)]);
        let f = filter_by_confidence(&r, 0.7).unwrap();
        assert_eq!(f.scores(), &[0.9, 0.7]);
    }

    #[test]
    fn ratio_filter_alpha_zero_keeps_positive_scores() {
        let r = raw(&[(0.0, 5.0, 0.2), (20.0, 5.0, 0.0), (40.0, 5.0, 0.1)]);
        let f = filter_by_confidence(&r, 0.0).unwrap();
        assert_eq!(f.scores(), &[0.2, 0.1]);
    }

    #[test]
    fn ratio_filter_alpha_one_keeps_only_argmax() {
        let r = raw(&[(0.0, 5.0, 0.3), (20.0, 5.0, 0.8), (40.0, 5.0, 0.79)]);
        let f = filter_by_confidence(&r, 1.0).unwrap();
        assert_eq!(f.scores(), &[0.8]);
        assert_eq!(f.boxes()[0].x(), 20.0);
    }

    #[test]
    fn ratio_filter_keeps_argmax_when_all_scores_are_zero() {
        let r = raw(&[(0.0, 5.0, 0.0), (20.0, 5.0, 0.0)]);
        let f = filter_by_confidence(&r, 0.7).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.boxes()[0].x(), 0.0);
    }

    #[test]
    fn soft_nms_gaussian_decay_drops_heavy_overlap() {
        // 10x10 boxes shifted by 10/3 overlap with IoU exactly 0.5
        let r = raw(&[(0.0, 10.0, 0.9), (10.0 / 3.0, 10.0, 0.8)]);
        let o = iou(&r.boxes()[0], &r.boxes()[1]);
        assert_relative_eq!(o, 0.5, epsilon = 1e-12);

        let decayed = 0.8 * (-25.0f64).exp();
        assert_relative_eq!(decayed, 1.1109e-11, max_relative = 1e-3);

        let kept = soft_nms(&r, 0.25, 0.01, 1e-3).unwrap();
        assert_eq!(kept.scores(), &[0.9]);

        // without a floor the decayed score survives with the hand-computed value
        let kept = soft_nms(&r, 0.25, 0.01, 0.0).unwrap();
        assert_eq!(kept.len(), 2);
        assert_relative_eq!(kept.scores()[1], decayed, max_relative = 1e-12);
    }

    #[test]
    fn soft_nms_leaves_disjoint_boxes_alone() {
        let r = raw(&[(0.0, 5.0, 0.6), (50.0, 5.0, 0.9)]);
        let kept = soft_nms(&r, 0.25, 0.01, 1e-3).unwrap();
        assert_eq!(kept.scores(), &[0.9, 0.6]);
    }

    #[test]
    fn soft_nms_single_box_is_unchanged() {
        let r = raw(&[(3.0, 5.0, 0.4)]);
        assert_eq!(soft_nms(&r, 0.25, 0.01, 1e-3).unwrap(), r);
    }

    #[test]
    fn soft_nms_rejects_bad_sigma() {
        let r = raw(&[(3.0, 5.0, 0.4)]);
        assert!(soft_nms(&r, 0.25, 0.0, 1e-3).is_err());
        assert!(soft_nms(&r, 0.25, -1.0, 1e-3).is_err());
        assert!(soft_nms(&r, 0.25, f64::NAN, 1e-3).is_err());
    }

    #[test]
    fn soft_nms_below_threshold_overlap_is_not_penalised() {
        // IoU 1/3 with threshold 0.5: untouched
        let r = raw(&[(0.0, 10.0, 0.9), (5.0, 10.0, 0.8)]);
        let kept = soft_nms(&r, 0.5, 0.01, 1e-3).unwrap();
        assert_eq!(kept.scores(), &[0.9, 0.8]);
    }

    #[test]
    fn assemble_appends_kalman_box() {
        let r = raw(&[(0.0, 5.0, 0.9), (50.0, 5.0, 0.8)]);
        let k = BBox::new(1.0, 1.0, 5.0, 5.0).unwrap();
        let set = assemble(&r, Some(k));
        assert_eq!(set.len(), 3);
        assert_eq!(set.kalman_index(), Some(2));
        assert_eq!(set.boxes()[2], k);
        assert_eq!(set.top(), 0);

        let plain = assemble(&r, None);
        assert_eq!(plain.boxes(), r.boxes());
        assert_eq!(plain.kalman_index(), None);
    }
}
