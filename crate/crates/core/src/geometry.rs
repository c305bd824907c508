//! Boxes, tracklets and the overlap measures used for association.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `(x, y, w, h)` in continuous image coordinates, with
/// `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawBox> for BBox {
    type Error = Error;

    fn try_from(r: RawBox) -> Result<Self> {
        BBox::new(r.x, r.y, r.w, r.h)
    }
}

impl From<BBox> for RawBox {
    fn from(b: BBox) -> Self {
        RawBox { x: b.x, y: b.y, w: b.w, h: b.h }
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    /// Area computed from the edge coordinates, so that a box intersected
    /// with itself yields exactly its own area.
    pub fn area(&self) -> f64 {
        (self.right() - self.x) * (self.bottom() - self.y)
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// A contiguous run of per-frame boxes, stored newest first: `boxes[0]` is
/// the box at `end_frame`, `boxes[k]` the box at `end_frame - k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    end_frame: usize,
    boxes: Vec<BBox>,
}

impl Tracklet {
    pub fn new(end_frame: usize, boxes: Vec<BBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::EmptyTracklet);
        }
        if boxes.len() > end_frame + 1 {
            return Err(Error::InvalidParameter {
                name: "boxes",
                reason: format!("{} boxes cannot end at frame {end_frame}", boxes.len()),
            });
        }
        Ok(Self { end_frame, boxes })
    }

    pub fn single(frame: usize, b: BBox) -> Self {
        Self { end_frame: frame, boxes: vec![b] }
    }

    pub fn end_frame(&self) -> usize {
        self.end_frame
    }

    pub fn start_frame(&self) -> usize {
        self.end_frame + 1 - self.boxes.len()
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn head(&self) -> &BBox {
        &self.boxes[0]
    }

    pub fn box_at(&self, frame: usize) -> Option<&BBox> {
        if frame > self.end_frame {
            return None;
        }
        self.boxes.get(self.end_frame - frame)
    }

    /// Puts `b` in front as the box of frame `end_frame + 1`. When the
    /// tracklet already holds `max_len` boxes the oldest one is dropped, so
    /// short tracklets grow until they reach `max_len`.
    pub fn prepend(&mut self, b: BBox, max_len: usize) {
        let max_len = max_len.max(1);
        self.boxes.insert(0, b);
        self.boxes.truncate(max_len);
        self.end_frame += 1;
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.translated(dx, dy))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.end_frame, boxes)
    }
}

/// Mean per-frame IoU of two tracklets ending at the same frame, taken over
/// the frames both of them cover.
pub fn tracklet_avg_iou(p: &Tracklet, q: &Tracklet) -> Result<f64> {
    if p.end_frame != q.end_frame {
        return Err(Error::FrameMismatch(p.end_frame, q.end_frame));
    }
    let n = p.len().min(q.len());
    let sum: f64 = p.boxes.iter().zip(&q.boxes).map(|(a, b)| iou(a, b)).sum();
    Ok((sum / n as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -2.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn deserialize_validates() {
        let ok: BBox = serde_json::from_str(r#"{"x":1,"y":2,"w":3,"h":4}"#).unwrap();
        assert_eq!(ok, b(1.0, 2.0, 3.0, 4.0));
        assert!(serde_json::from_str::<BBox>(r#"{"x":1,"y":2,"w":0,"h":4}"#).is_err());
    }

    #[test]
    fn iou_identity_disjoint_and_half_shift() {
        let a = b(0.1, 0.7, 0.2, 3.3);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&b(0.0, 0.0, 10.0, 10.0), &b(20.0, 20.0, 5.0, 5.0)), 0.0);
        // intersection 50, union 150
        assert_relative_eq!(
            iou(&b(0.0, 0.0, 10.0, 10.0), &b(5.0, 0.0, 10.0, 10.0)),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn touching_edges_do_not_overlap() {
        assert_eq!(iou(&b(0.0, 0.0, 10.0, 10.0), &b(10.0, 0.0, 10.0, 10.0)), 0.0);
    }

    #[test]
    fn avg_iou_of_identical_tracklets_is_one() {
        let t = Tracklet::new(5, vec![b(0.0, 0.0, 4.0, 4.0), b(1.0, 0.0, 4.0, 4.0)]).unwrap();
        assert_eq!(tracklet_avg_iou(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn avg_iou_averages_per_frame_values() {
        // frame 3: identical (1.0); frame 2: 1/3 overlap each way -> 0.5 requires
        // inter/union = 0.5, e.g. a 10x10 box against a 10x5 box inside it.
        let p = Tracklet::new(3, vec![b(0.0, 0.0, 10.0, 10.0), b(0.0, 0.0, 10.0, 10.0)]).unwrap();
        let q = Tracklet::new(3, vec![b(0.0, 0.0, 10.0, 10.0), b(0.0, 0.0, 10.0, 5.0)]).unwrap();
        assert_relative_eq!(tracklet_avg_iou(&p, &q).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn avg_iou_truncates_to_shorter_tracklet() {
        let long: Vec<BBox> = (0..9).map(|k| b(k as f64 * 3.0, 0.0, 10.0, 10.0)).collect();
        let short: Vec<BBox> = long[..4].to_vec();
        let p = Tracklet::new(20, long.clone()).unwrap();
        let q = Tracklet::new(20, short).unwrap();
        assert_eq!(tracklet_avg_iou(&p, &q).unwrap(), 1.0);

        // perturb a frame outside the shared span: no effect
        let mut far = long;
        far[6] = b(500.0, 500.0, 1.0, 1.0);
        let p2 = Tracklet::new(20, far).unwrap();
        assert_eq!(tracklet_avg_iou(&p2, &q).unwrap(), 1.0);
    }

    #[test]
    fn avg_iou_rejects_mismatched_end_frames() {
        let p = Tracklet::single(4, b(0.0, 0.0, 1.0, 1.0));
        let q = Tracklet::single(5, b(0.0, 0.0, 1.0, 1.0));
        assert_eq!(tracklet_avg_iou(&p, &q), Err(Error::FrameMismatch(4, 5)));
    }

    #[test]
    fn prepend_grows_then_slides() {
        let mut t = Tracklet::single(0, b(0.0, 0.0, 1.0, 1.0));
        for k in 1..5 {
            t.prepend(b(k as f64, 0.0, 1.0, 1.0), 3);
        }
        assert_eq!(t.end_frame(), 4);
        assert_eq!(t.len(), 3);
        assert_eq!(t.head().x(), 4.0);
        assert_eq!(t.box_at(2).unwrap().x(), 2.0);
        assert!(t.box_at(1).is_none());
        assert_eq!(t.start_frame(), 2);
    }

    #[test]
    fn tracklet_cannot_start_before_frame_zero() {
        assert!(Tracklet::new(1, vec![b(0.0, 0.0, 1.0, 1.0); 3]).is_err());
        assert_eq!(Tracklet::new(0, vec![]), Err(Error::EmptyTracklet));
    }
}
