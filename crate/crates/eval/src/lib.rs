//! Tracking metrics: VOT-style accuracy and robustness, a simplified expected
//! average overlap, success-plot AUC with precision and GOT-style overlap
//! rates, and identity switches against multi-object ground truth.

use nbtrack_core::{iou, BBox};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction has {pred} frames, ground truth {gt}")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("nothing to evaluate")]
    Empty,
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Number of IoU thresholds sampled on `[0, 1]` for the success curve.
pub const SUCCESS_THRESHOLDS: usize = 51;
pub const PRECISION_PX: f64 = 20.0;
pub const NORM_PRECISION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// A frame with IoU at or below this counts as a tracking failure.
    pub fail_iou: f64,
    /// Frames skipped after a failure before evaluation resumes.
    pub skip: usize,
    /// Sub-sequence lengths averaged by `eao_lite`.
    pub intervals: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { fail_iou: 0.0, skip: 5, intervals: vec![25, 50, 100] }
    }
}

fn check(pred: &[BBox], gt: &[BBox]) -> EvalResult<Vec<f64>> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotResult {
    pub accuracy: f64,
    pub robustness: f64,
    pub failures: Vec<usize>,
    /// Per-frame overlap: IoU on tracked frames, 0 on failed or skipped ones.
    pub overlaps: Vec<f64>,
}

/// Anchored-restart protocol on a fixed prediction. A failed frame and the
/// `skip` frames after it are not tracked; accuracy averages IoU over
/// tracked frames and robustness is the tracked fraction.
pub fn vot_metrics(pred: &[BBox], gt: &[BBox], fail_iou: f64, skip: usize) -> EvalResult<VotResult> {
    let ious = check(pred, gt)?;
    let mut failures = Vec::new();
    let mut overlaps = vec![0.0; ious.len()];
    let mut tracked = 0usize;
    let mut sum = 0.0;
    let mut i = 0;
    while i < ious.len() {
        if ious[i] <= fail_iou {
            failures.push(i);
            i += 1 + skip;
            continue;
        }
        overlaps[i] = ious[i];
        sum += ious[i];
        tracked += 1;
        i += 1;
    }
    let accuracy = if tracked > 0 { sum / tracked as f64 } else { 0.0 };
    Ok(VotResult { accuracy, robustness: tracked as f64 / ious.len() as f64, failures, overlaps })
}

/// Mean over `intervals` of the average overlap on the first `L` frames,
/// with failed and skipped frames contributing 0.
pub fn eao_lite(pred: &[BBox], gt: &[BBox], intervals: &[usize], fail_iou: f64, skip: usize) -> EvalResult<f64> {
    let vot = vot_metrics(pred, gt, fail_iou, skip)?;
    Ok(eao_from_overlaps(&vot.overlaps, intervals))
}

pub fn eao_from_overlaps(overlaps: &[f64], intervals: &[usize]) -> f64 {
    let valid: Vec<usize> = intervals.iter().map(|&l| l.min(overlaps.len())).filter(|&l| l > 0).collect();
    if valid.is_empty() {
        return 0.0;
    }
    valid.iter().map(|&l| overlaps[..l].iter().sum::<f64>() / l as f64).sum::<f64>() / valid.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessMetrics {
    pub auc: f64,
    pub precision: f64,
    pub norm_precision: f64,
    pub ao: f64,
    pub sr50: f64,
    pub sr75: f64,
}

pub fn success_threshold(k: usize) -> f64 {
    k as f64 / (SUCCESS_THRESHOLDS - 1) as f64
}

/// A frame succeeds at threshold `t` when it overlaps the truth at all and
/// its IoU is at least `t`.
pub fn success_rate(ious: &[f64], t: f64) -> f64 {
    ious.iter().filter(|&&v| v > 0.0 && v >= t).count() as f64 / ious.len() as f64
}

pub fn success_metrics(pred: &[BBox], gt: &[BBox]) -> EvalResult<SuccessMetrics> {
    let ious = check(pred, gt)?;
    let n = ious.len() as f64;
    let auc = (0..SUCCESS_THRESHOLDS).map(|k| success_rate(&ious, success_threshold(k))).sum::<f64>()
        / SUCCESS_THRESHOLDS as f64;
    let mut near = 0usize;
    let mut norm_near = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        let ((px, py), (gx, gy)) = (p.center(), g.center());
        if (px - gx).hypot(py - gy) <= PRECISION_PX {
            near += 1;
        }
        if ((px - gx) / g.w()).hypot((py - gy) / g.h()) <= NORM_PRECISION {
            norm_near += 1;
        }
    }
    let above = |t: f64| ious.iter().filter(|&&v| v > t).count() as f64 / n;
    Ok(SuccessMetrics {
        auc,
        precision: near as f64 / n,
        norm_precision: norm_near as f64 / n,
        ao: ious.iter().sum::<f64>() / n,
        sr50: above(0.5),
        sr75: above(0.75),
    })
}

/// Counts changes of the identity the prediction sits on. Each frame is
/// assigned to the object it overlaps most (lowest id on ties, nothing if it
/// overlaps none); the count starts from `target`. `objects` holds per-frame
/// boxes aligned with `pred`.
pub fn id_switches(pred: &[BBox], objects: &[(u32, Vec<Option<BBox>>)], target: u32) -> usize {
    let mut current = target;
    let mut switches = 0;
    for (f, p) in pred.iter().enumerate() {
        let mut best: Option<(u32, f64)> = None;
        for (id, boxes) in objects {
            let Some(Some(b)) = boxes.get(f) else { continue };
            let v = iou(p, b);
            if v > 0.0 && best.is_none_or(|(bid, bv)| v > bv || (v == bv && *id < bid)) {
                best = Some((*id, v));
            }
        }
        if let Some((id, _)) = best {
            if id != current {
                switches += 1;
                current = id;
            }
        }
    }
    switches
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub accuracy: f64,
    pub robustness: f64,
    pub failures: usize,
    pub eao_lite: f64,
    pub auc: f64,
    pub precision: f64,
    pub norm_precision: f64,
    pub ao: f64,
    pub sr50: f64,
    pub sr75: f64,
    pub id_switches: usize,
}

pub fn evaluate(
    pred: &[BBox],
    gt: &[BBox],
    objects: &[(u32, Vec<Option<BBox>>)],
    target: u32,
    cfg: &EvalConfig,
) -> EvalResult<EvalReport> {
    let vot = vot_metrics(pred, gt, cfg.fail_iou, cfg.skip)?;
    let s = success_metrics(pred, gt)?;
    Ok(EvalReport {
        frames: pred.len(),
        accuracy: vot.accuracy,
        robustness: vot.robustness,
        failures: vot.failures.len(),
        eao_lite: eao_from_overlaps(&vot.overlaps, &cfg.intervals),
        auc: s.auc,
        precision: s.precision,
        norm_precision: s.norm_precision,
        ao: s.ao,
        sr50: s.sr50,
        sr75: s.sr75,
        id_switches: id_switches(pred, objects, target),
    })
}
