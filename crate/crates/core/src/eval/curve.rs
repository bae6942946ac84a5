use serde::{Deserialize, Serialize};

use super::matching::score_order;

pub const RECALL_POINTS: usize = 101;

/// The recall grid `0.00, 0.01, ..., 1.00`.
pub fn recall_grid() -> impl Iterator<Item = f64> {
    (0..RECALL_POINTS).map(|i| i as f64 / 100.0)
}

/// A scored detection reduced to its match outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub score: f64,
    pub tp: bool,
}

/// 101-point interpolated precision/recall curve.
///
/// A curve over zero ground truths is undefined: `precision` is empty and `ap` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub ap: Option<f64>,
    pub num_gt: usize,
    pub num_dets: usize,
    pub num_tp: usize,
}

impl PrCurve {
    pub fn undefined(num_dets: usize) -> Self {
        Self {
            precision: Vec::new(),
            ap: None,
            num_gt: 0,
            num_dets,
            num_tp: 0,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.ap.is_some()
    }

    /// Pointwise mean of the defined curves; undefined if none is.
    pub fn mean<'a>(curves: impl IntoIterator<Item = &'a PrCurve>) -> PrCurve {
        let mut sum = vec![0.0; RECALL_POINTS];
        let (mut n, mut num_gt, mut num_dets, mut num_tp) = (0usize, 0, 0, 0);
        for c in curves {
            num_dets += c.num_dets;
            if !c.is_defined() {
                continue;
            }
            n += 1;
            num_gt += c.num_gt;
            num_tp += c.num_tp;
            for (s, p) in sum.iter_mut().zip(&c.precision) {
                *s += p;
            }
        }
        if n == 0 {
            return PrCurve::undefined(num_dets);
        }
        let precision: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
        let ap = precision.iter().sum::<f64>() / RECALL_POINTS as f64;
        PrCurve {
            precision,
            ap: Some(ap),
            num_gt,
            num_dets,
            num_tp,
        }
    }
}

/// Builds the curve from match outcomes pooled over partitions.
///
/// Entries are ranked by descending score (stable), cumulative precision gets its
/// right-to-left max envelope, and each grid recall `r` takes the envelope value at the
/// first rank whose recall reaches `r` (0 if none does).
pub fn pr_curve(entries: &[CurveEntry], num_gt: usize) -> PrCurve {
    if num_gt == 0 {
        return PrCurve::undefined(entries.len());
    }
    let order = score_order(entries.iter().map(|e| e.score));
    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &i in &order {
        if entries[i].tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let sampled: Vec<f64> = recall_grid()
        .map(|r| {
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .collect();
    let ap = sampled.iter().sum::<f64>() / RECALL_POINTS as f64;
    PrCurve {
        precision: sampled,
        ap: Some(ap),
        num_gt,
        num_dets: entries.len(),
        num_tp: tp,
    }
}
