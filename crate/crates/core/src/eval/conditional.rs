use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{class_curves_from_entries, iou, match_all, partition, CurveEntry, CurveMode, Partition, PrCurve};
use crate::annotations::{AnnotationSet, Class, Detection};
use crate::{Error, Result};

/// Which condition an error is blamed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    Extreme,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCurves {
    pub base: PrCurve,
    pub extreme_eliminated: PrCurve,
    pub other_eliminated: PrCurve,
}

/// Pooled base / extreme-eliminated / other-eliminated curves at one IoU threshold.
pub fn conditional_eval(
    dets: &[Detection],
    set: &AnnotationSet,
    iou_threshold: f64,
    attribution_iou: f64,
) -> Result<ConditionalCurves> {
    conditional_eval_with(dets, set, iou_threshold, attribution_iou, CurveMode::Pooled)
}

pub fn conditional_eval_with(
    dets: &[Detection],
    set: &AnnotationSet,
    iou_threshold: f64,
    attribution_iou: f64,
    mode: CurveMode,
) -> Result<ConditionalCurves> {
    for (index, d) in dets.iter().enumerate() {
        d.validate()
            .map_err(|reason| Error::InvalidDetection { index, reason })?;
    }
    let parts = partition(dets, set)?;
    conditional_from_parts(set, &parts, iou_threshold, attribution_iou, mode)
}

#[derive(Default)]
struct MissCounts {
    num_gt: usize,
    missed_extreme: usize,
    missed_other: usize,
}

impl MissCounts {
    fn remaining(&self, drop: Option<Attribution>) -> usize {
        self.num_gt
            - match drop {
                None => 0,
                Some(Attribution::Extreme) => self.missed_extreme,
                Some(Attribution::Other) => self.missed_other,
            }
    }
}

pub(crate) fn conditional_from_parts(
    set: &AnnotationSet,
    parts: &[Partition],
    iou_threshold: f64,
    attribution_iou: f64,
    mode: CurveMode,
) -> Result<ConditionalCurves> {
    if let Some(inst) = set.instances.iter().find(|i| i.flags.extreme.is_none()) {
        return Err(Error::MissingFlags(format!(
            "conditional evaluation needs the extreme flag on every instance; {} has none",
            inst.id
        )));
    }
    if !(0.0..=1.0).contains(&attribution_iou) {
        return Err(Error::InvalidParameter(format!(
            "attribution IoU must lie in [0, 1], got {attribution_iou}"
        )));
    }
    let matches = match_all(parts, iou_threshold);
    let mut counts: BTreeMap<Class, MissCounts> = BTreeMap::new();
    // (class, entry, attribution) in partition order; true positives carry no attribution.
    let mut entries: Vec<(Class, CurveEntry, Option<Attribution>)> = Vec::new();

    for (p, m) in parts.iter().zip(&matches) {
        let is_extreme = |g: usize| set.instances[p.gt_ids[g]].flags.extreme == Some(true);
        let c = counts.entry(p.class).or_default();
        c.num_gt += p.gts.len();
        for (g, &matched) in m.gt_matched.iter().enumerate() {
            if !matched {
                if is_extreme(g) {
                    c.missed_extreme += 1;
                } else {
                    c.missed_other += 1;
                }
            }
        }
        for d in &m.detections {
            let entry = CurveEntry { score: d.score, tp: d.is_tp() };
            let attribution = if d.is_tp() {
                None
            } else {
                let bbox = p.dets[d.index].0;
                let mut best: Option<(usize, f64)> = None;
                for (g, gt) in p.gts.iter().enumerate() {
                    let o = iou(&bbox, gt);
                    if o > 0.0 && o >= attribution_iou && best.is_none_or(|(_, b)| o > b) {
                        best = Some((g, o));
                    }
                }
                Some(match best {
                    Some((g, _)) if is_extreme(g) => Attribution::Extreme,
                    _ => Attribution::Other,
                })
            };
            entries.push((p.class, entry, attribution));
        }
    }

    let build = |drop: Option<Attribution>| -> PrCurve {
        let kept = entries
            .iter()
            .filter(|(_, _, a)| drop.is_none() || *a != drop);
        match mode {
            CurveMode::Pooled => {
                let n = counts.values().map(|c| c.remaining(drop)).sum();
                let kept: Vec<CurveEntry> = kept.map(|x| x.1).collect();
                super::pr_curve(&kept, n)
            }
            CurveMode::PerClassMean => {
                let groups = counts.iter().map(|(&class, c)| {
                    let e: Vec<CurveEntry> = kept.clone().filter(|x| x.0 == class).map(|x| x.1).collect();
                    (class, e, c.remaining(drop))
                });
                PrCurve::mean(class_curves_from_entries(groups).values())
            }
        }
    };

    Ok(ConditionalCurves {
        base: build(None),
        extreme_eliminated: build(Some(Attribution::Extreme)),
        other_eliminated: build(Some(Attribution::Other)),
    })
}
