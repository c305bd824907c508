//! The contract a backbone single-object tracker has to satisfy.
//!
//! The engine never looks at pixels: it only asks the tracker for templates,
//! per-frame proposals, and argmax tracking over a run of frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Tracklet};

/// Appearance handle cropped at `source_box` in frame `source_frame`. The
/// feature payload is whatever the tracker needs to score proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub source_frame: usize,
    pub source_box: BBox,
    pub features: Vec<f64>,
}

/// Proposals for one frame: boxes with aligned confidences in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCandidates {
    boxes: Vec<BBox>,
    scores: Vec<f64>,
}

impl RawCandidates {
    pub fn new(boxes: Vec<BBox>, scores: Vec<f64>) -> Result<Self> {
        if boxes.len() != scores.len() {
            return Err(Error::MisalignedScores { boxes: boxes.len(), scores: scores.len() });
        }
        if boxes.is_empty() {
            return Err(Error::NoCandidates);
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidParameter {
                name: "scores",
                reason: format!("confidence {s} outside [0, 1]"),
            });
        }
        Ok(Self { boxes, scores })
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Index of the highest score; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate().skip(1) {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> (BBox, f64) {
        let i = self.argmax();
        (self.boxes[i], self.scores[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BBox, f64)> {
        self.boxes.iter().zip(self.scores.iter().copied())
    }
}

/// A backbone tracker. Implementations must be deterministic: identical
/// `(template, frame, prior)` triples give identical proposals.
pub trait TrackerPort {
    /// Number of frames in the sequence being tracked.
    fn num_frames(&self) -> usize;

    fn make_template(&self, frame: usize, bbox: &BBox) -> Result<Template>;

    /// Proposals for `frame`, searching around `prior`. Never empty.
    fn propose(&self, tpl: &Template, frame: usize, prior: &BBox) -> Result<RawCandidates>;

    /// Tracks from `start` through `frames` (consecutive, ascending or
    /// descending), taking the highest-scoring proposal at every step and
    /// feeding it back as the next prior. The returned tracklet ends at the
    /// latest frame visited.
    fn track_segment(&self, tpl: &Template, start: &BBox, frames: &[usize]) -> Result<Tracklet> {
        check_run(frames)?;
        let mut prior = *start;
        let mut out = Vec::with_capacity(frames.len());
        for &f in frames {
            prior = self.propose(tpl, f, &prior)?.best().0;
            out.push(prior);
        }
        // tracklets are stored newest first
        let ascending = frames.len() > 1 && frames[1] > frames[0];
        if ascending {
            out.reverse();
        }
        let end = *frames.iter().max().expect("non-empty");
        Tracklet::new(end, out)
    }
}

impl<T: TrackerPort + ?Sized> TrackerPort for &T {
    fn num_frames(&self) -> usize {
        (**self).num_frames()
    }

    fn make_template(&self, frame: usize, bbox: &BBox) -> Result<Template> {
        (**self).make_template(frame, bbox)
    }

    fn propose(&self, tpl: &Template, frame: usize, prior: &BBox) -> Result<RawCandidates> {
        (**self).propose(tpl, frame, prior)
    }

    fn track_segment(&self, tpl: &Template, start: &BBox, frames: &[usize]) -> Result<Tracklet> {
        (**self).track_segment(tpl, start, frames)
    }
}

fn check_run(frames: &[usize]) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::EmptyFrames);
    }
    if frames.len() > 1 {
        let up = frames[1] > frames[0];
        let consecutive = frames.windows(2).all(|w| {
            if up {
                w[1] == w[0] + 1
            } else {
                w[0] == w[1] + 1
            }
        });
        if !consecutive {
            return Err(Error::NonConsecutiveFrames);
        }
    }
    Ok(())
}

/// Frames `t-1, t-2, ..., t-len` used to backtrack a candidate found at `t`.
pub fn backtrack_frames(t: usize, len: usize) -> Vec<usize> {
    (1..=len.min(t)).map(|k| t - k).collect()
}
