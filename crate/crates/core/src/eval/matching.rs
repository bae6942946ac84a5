use serde::{Deserialize, Serialize};

use crate::annotations::BBox;

/// Intersection over union of two boxes with positive extent.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetMatch {
    /// Position of the detection in the input slice.
    pub index: usize,
    pub score: f64,
    /// Index of the matched ground truth, `None` for a false positive.
    pub gt: Option<usize>,
    /// IoU with the matched ground truth (0 for false positives).
    pub iou: f64,
}

impl DetMatch {
    pub fn is_tp(&self) -> bool {
        self.gt.is_some()
    }
}

/// Outcome of greedy matching within one (image, class) partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub threshold: f64,
    /// Detections in descending score order (ties keep input order).
    pub detections: Vec<DetMatch>,
    pub gt_matched: Vec<bool>,
}

impl MatchSet {
    pub fn tp_count(&self) -> usize {
        self.detections.iter().filter(|d| d.is_tp()).count()
    }
}

/// Indices of `scores` in descending order, stable for ties.
pub(crate) fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy COCO matching: each detection, highest score first, takes the still-unmatched
/// ground truth with the largest IoU `>= threshold` (first one on exact ties).
pub fn match_detections(dets: &[(BBox, f64)], gts: &[BBox], threshold: f64) -> MatchSet {
    let mut gt_matched = vec![false; gts.len()];
    let detections = score_order(dets.iter().map(|d| d.1))
        .into_iter()
        .map(|index| {
            let (bbox, score) = dets[index];
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if gt_matched[g] {
                    continue;
                }
                let o = iou(&bbox, gt);
                if o >= threshold && best.is_none_or(|(_, b)| o > b) {
                    best = Some((g, o));
                }
            }
            if let Some((g, _)) = best {
                gt_matched[g] = true;
            }
            DetMatch {
                index,
                score,
                gt: best.map(|b| b.0),
                iou: best.map_or(0.0, |b| b.1),
            }
        })
        .collect();
    MatchSet {
        threshold,
        detections,
        gt_matched,
    }
}
