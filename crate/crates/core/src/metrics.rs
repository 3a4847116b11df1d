//! Frame-wise and segmental evaluation metrics, plus the competitive-ratio
//! arithmetic used by the delay/accuracy reports.
//!
//! All scores are percentages in `[0, 100]`. Segmental scores operate on
//! run-length segment encodings of the label sequences; see
//! [`frames_to_segments`].

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("sequences have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty label sequence")]
    EmptyInput,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("competitive ratio denominator must be positive, got {0}")]
    ZeroDenominator(f64),
    #[error("segment at index {index} is malformed (start {start}, end {end})")]
    MalformedSegment { index: usize, start: usize, end: usize },
}

/// A maximal run of equal labels, over the half-open frame range
/// `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Run-length encode a label sequence into maximal segments.
pub fn frames_to_segments(labels: &[usize]) -> Result<Vec<Segment>, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut segments = Vec::new();
    let mut start = 0usize;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            segments.push(Segment { label: labels[start], start, end: t });
            start = t;
        }
    }
    Ok(segments)
}

/// Expand segments back to per-frame labels.
pub fn segments_to_frames(segments: &[Segment]) -> Vec<usize> {
    let mut out = Vec::new();
    for s in segments {
        out.extend(core::iter::repeat_n(s.label, s.len()));
    }
    out
}

/// Frame-wise accuracy, percent.
pub fn accuracy(pred: &[usize], gt: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(pred, gt)?;
    let matching = pred.iter().zip(gt).filter(|(a, b)| a == b).count();
    Ok(100.0 * matching as f64 / gt.len() as f64)
}

/// Macro-averaged F1 over all `n_classes` classes, percent. A class absent
/// from both prediction and ground truth contributes an F1 of zero.
pub fn f1_macro(pred: &[usize], gt: &[usize], n_classes: usize) -> Result<f64, MetricsError> {
    check_lengths(pred, gt)?;
    for &y in pred.iter().chain(gt) {
        if y >= n_classes {
            return Err(MetricsError::LabelOutOfRange { label: y, n_classes });
        }
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &g) in pred.iter().zip(gt) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(100.0 * sum / n_classes as f64)
}

fn check_lengths(pred: &[usize], gt: &[usize]) -> Result<(), MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch { left: pred.len(), right: gt.len() });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Levenshtein distance between two label strings.
fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        core::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Segmental edit score, percent: `100 * (1 - Lev / max(|pred|, |gt|))`
/// over the segment label strings. Defined as 100 when both lists are empty.
pub fn edit_score(pred_segments: &[Segment], gt_segments: &[Segment]) -> f64 {
    let pred: Vec<usize> = pred_segments.iter().map(|s| s.label).collect();
    let gt: Vec<usize> = gt_segments.iter().map(|s| s.label).collect();
    let denom = pred.len().max(gt.len());
    if denom == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(&pred, &gt) as f64 / denom as f64)
}

fn validate_segments(segments: &[Segment]) -> Result<(), MetricsError> {
    for (index, s) in segments.iter().enumerate() {
        if s.start >= s.end {
            return Err(MetricsError::MalformedSegment { index, start: s.start, end: s.end });
        }
    }
    Ok(())
}

fn iou(a: &Segment, b: &Segment) -> f64 {
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start));
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Segmental F1 at IoU threshold `k` percent.
///
/// Predicted segments are processed in temporal order. Each one is matched
/// greedily against the best-overlapping, same-label, not-yet-consumed
/// ground-truth segment; an IoU strictly greater than `k/100` makes it a
/// true positive and consumes that ground-truth segment, anything else is a
/// false positive. Unconsumed ground-truth segments are false negatives.
pub fn f1_at_k(
    pred_segments: &[Segment],
    gt_segments: &[Segment],
    k: f64,
) -> Result<f64, MetricsError> {
    validate_segments(pred_segments)?;
    validate_segments(gt_segments)?;
    if pred_segments.is_empty() && gt_segments.is_empty() {
        return Ok(100.0);
    }
    let threshold = k / 100.0;
    let mut consumed = vec![false; gt_segments.len()];
    let mut tp = 0usize;
    let mut fp = 0usize;
    for p in pred_segments {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt_segments.iter().enumerate() {
            if consumed[j] || g.label != p.label {
                continue;
            }
            let overlap = iou(p, g);
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((j, overlap));
            }
        }
        match best {
            Some((j, overlap)) if overlap > threshold => {
                tp += 1;
                consumed[j] = true;
            }
            _ => fp += 1,
        }
    }
    let fn_ = consumed.iter().filter(|&&c| !c).count();
    Ok(100.0 * 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

/// Ratio of a delayed network's score to the best offline score.
pub fn competitive_ratio(perf_delayed: f64, perf_best_offline: f64) -> Result<f64, MetricsError> {
    if perf_best_offline <= 0.0 {
        return Err(MetricsError::ZeroDenominator(perf_best_offline));
    }
    Ok(perf_delayed / perf_best_offline)
}

/// Ratio of the best bounded-future score to the best reduced-receptive
/// score inside one delay interval; greater than 1 means bounded-future wins.
pub fn local_competitive_ratio(best_bf: f64, best_rr: f64) -> Result<f64, MetricsError> {
    if best_rr <= 0.0 {
        return Err(MetricsError::ZeroDenominator(best_rr));
    }
    Ok(best_bf / best_rr)
}

/// Scores of one prediction against one ground truth, as reported per video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub edit_score: f64,
    /// Segmental F1 keyed by IoU threshold percent.
    pub f1_at: BTreeMap<u32, f64>,
    pub fw_frames: u64,
    pub fw_seconds: f64,
}

/// The standard thresholds reported everywhere.
pub const F1_THRESHOLDS: [u32; 3] = [10, 25, 50];

impl MetricsReport {
    /// Evaluate a prediction at the standard thresholds.
    pub fn compute(
        pred: &[usize],
        gt: &[usize],
        n_classes: usize,
        fw_frames: u64,
        fw_seconds: f64,
    ) -> Result<MetricsReport, MetricsError> {
        check_lengths(pred, gt)?;
        let pred_segments = frames_to_segments(pred)?;
        let gt_segments = frames_to_segments(gt)?;
        let mut f1_at = BTreeMap::new();
        for k in F1_THRESHOLDS {
            f1_at.insert(k, f1_at_k(&pred_segments, &gt_segments, k as f64)?);
        }
        Ok(MetricsReport {
            accuracy: accuracy(pred, gt)?,
            f1_macro: f1_macro(pred, gt, n_classes)?,
            edit_score: edit_score(&pred_segments, &gt_segments),
            f1_at,
            fw_frames,
            fw_seconds,
        })
    }

    pub fn f1_50(&self) -> f64 {
        *self.f1_at.get(&50).expect("standard thresholds present")
    }

    /// Elementwise mean of several reports (e.g. across videos).
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        Self::aggregate(reports, |vals| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Elementwise population standard deviation of several reports.
    pub fn std(reports: &[MetricsReport]) -> Option<MetricsReport> {
        Self::aggregate(reports, |vals| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            crate::math::sqrt(var)
        })
    }

    fn aggregate(reports: &[MetricsReport], f: impl Fn(&[f64]) -> f64) -> Option<MetricsReport> {
        let first = reports.first()?;
        let collect = |get: &dyn Fn(&MetricsReport) -> f64| -> f64 {
            let vals: Vec<f64> = reports.iter().map(get).collect();
            f(&vals)
        };
        let mut f1_at = BTreeMap::new();
        for &k in first.f1_at.keys() {
            f1_at.insert(k, collect(&|r| r.f1_at[&k]));
        }
        Some(MetricsReport {
            accuracy: collect(&|r| r.accuracy),
            f1_macro: collect(&|r| r.f1_macro),
            edit_score: collect(&|r| r.edit_score),
            f1_at,
            fw_frames: first.fw_frames,
            fw_seconds: collect(&|r| r.fw_seconds),
        })
    }
}
