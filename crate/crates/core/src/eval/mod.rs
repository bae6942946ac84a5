//! COCO-style detection evaluation with lighting-condition error analysis.
//!
//! Detections and ground truth are partitioned by (image, class) and matched greedily
//! at each IoU threshold. Per-class 101-point AP is averaged over classes that have
//! ground truth; `ap` averages that over IoU 0.50:0.05:0.95.
//!
//! [`conditional_eval`] recomputes a curve after removing the misdetections attributed
//! to extreme low light (or to everything else): missed instances are attributed by
//! their `extreme` flag, false positives by the flag of their highest-IoU same-class
//! instance (when that IoU reaches `attribution_iou`, otherwise to "other").

mod conditional;
mod curve;
mod matching;
mod report;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{filter_instances, AnnotationSet, BBox, Class, Detection, InstanceFilter};
use crate::{Error, Result};

pub use conditional::{conditional_eval, conditional_eval_with, Attribution, ConditionalCurves};
pub use curve::{pr_curve, recall_grid, CurveEntry, PrCurve, RECALL_POINTS};
pub use matching::{iou, match_detections, DetMatch, MatchSet};
pub use report::{write_curves_csv, write_report_json, ClassReport, EvalReport, NamedCurve};

pub const DEFAULT_ATTRIBUTION_IOU: f64 = 0.1;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

/// How class-wise curves are combined into a single curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMode {
    /// One curve over all classes' detections and ground truth.
    #[default]
    Pooled,
    /// Pointwise mean of the per-class curves.
    PerClassMean,
}

impl std::str::FromStr for CurveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pooled" => Ok(CurveMode::Pooled),
            "per-class-mean" | "per-class" => Ok(CurveMode::PerClassMean),
            _ => Err(format!("expected pooled or per-class-mean, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub iou_thresholds: Vec<f64>,
    /// Applied to the ground truth before matching.
    pub filter: InstanceFilter,
    pub curve_mode: CurveMode,
    /// Adds the extreme/other elimination curves at IoU 0.5 and 0.75 with this attribution IoU.
    pub extreme_analysis: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou_thresholds: coco_iou_thresholds(),
            filter: InstanceFilter::default(),
            curve_mode: CurveMode::Pooled,
            extreme_analysis: None,
        }
    }
}

/// Ground truth and detections of one (image, class) cell.
#[derive(Debug, Clone)]
pub(crate) struct Partition {
    pub class: Class,
    /// (bbox, score) of detections, in input order.
    pub dets: Vec<(BBox, f64)>,
    /// Indices into the input detection list.
    pub det_ids: Vec<usize>,
    pub gts: Vec<BBox>,
    /// Indices into `set.instances`.
    pub gt_ids: Vec<usize>,
}

/// Groups detections and instances by (image, class), ordered by image id then class.
pub(crate) fn partition(dets: &[Detection], set: &AnnotationSet) -> Result<Vec<Partition>> {
    let known_images: HashSet<u64> = set.images.iter().map(|i| i.id).collect();
    let mut cells: BTreeMap<(u64, Class), Partition> = BTreeMap::new();
    fn cell(cells: &mut BTreeMap<(u64, Class), Partition>, image_id: u64, class: Class) -> &mut Partition {
        cells.entry((image_id, class)).or_insert_with(|| Partition {
            class,
            dets: Vec::new(),
            det_ids: Vec::new(),
            gts: Vec::new(),
            gt_ids: Vec::new(),
        })
    }
    for (i, inst) in set.instances.iter().enumerate() {
        let p = cell(&mut cells, inst.image_id, inst.class);
        p.gts.push(inst.bbox);
        p.gt_ids.push(i);
    }
    for (i, d) in dets.iter().enumerate() {
        if !known_images.contains(&d.image_id) {
            return Err(Error::UnknownImage(d.image_id));
        }
        let class = set
            .class_of(d.category_id)
            .ok_or(Error::UnknownCategory(d.category_id))?;
        let p = cell(&mut cells, d.image_id, class);
        p.dets.push((d.bbox, d.score));
        p.det_ids.push(i);
    }
    Ok(cells.into_values().collect())
}

/// Matches every partition at `threshold`, in partition order.
pub(crate) fn match_all(parts: &[Partition], threshold: f64) -> Vec<MatchSet> {
    parts
        .par_iter()
        .map(|p| match_detections(&p.dets, &p.gts, threshold))
        .collect()
}

fn class_curves(parts: &[Partition], matches: &[MatchSet]) -> BTreeMap<Class, PrCurve> {
    let mut grouped: BTreeMap<Class, (Vec<CurveEntry>, usize)> = BTreeMap::new();
    for (p, m) in parts.iter().zip(matches) {
        let slot = grouped.entry(p.class).or_default();
        slot.1 += p.gts.len();
        slot.0.extend(m.detections.iter().map(|d| CurveEntry {
            score: d.score,
            tp: d.is_tp(),
        }));
    }
    class_curves_from_entries(grouped.into_iter().map(|(c, (e, n))| (c, e, n)))
}

/// One curve per known class; classes missing from `groups` get an undefined curve.
pub(crate) fn class_curves_from_entries(
    groups: impl IntoIterator<Item = (Class, Vec<CurveEntry>, usize)>,
) -> BTreeMap<Class, PrCurve> {
    let mut curves: BTreeMap<Class, PrCurve> =
        Class::ALL.iter().map(|&c| (c, PrCurve::undefined(0))).collect();
    for (c, entries, n) in groups {
        curves.insert(c, pr_curve(&entries, n));
    }
    curves
}

fn combine(per_class: &BTreeMap<Class, PrCurve>, parts: &[Partition], matches: &[MatchSet], mode: CurveMode) -> PrCurve {
    match mode {
        CurveMode::PerClassMean => PrCurve::mean(per_class.values()),
        CurveMode::Pooled => {
            let entries: Vec<CurveEntry> = matches
                .iter()
                .flat_map(|m| m.detections.iter().map(|d| CurveEntry { score: d.score, tp: d.is_tp() }))
                .collect();
            pr_curve(&entries, parts.iter().map(|p| p.gts.len()).sum())
        }
    }
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub(crate) fn curve_name(threshold: f64) -> String {
    format!("C{}", (threshold * 100.0).round() as u32)
}

/// Full evaluation: AP per class and IoU threshold, mAP summaries, and plot-ready curves.
pub fn evaluate(dets: &[Detection], set: &AnnotationSet, options: &EvalOptions) -> Result<EvalReport> {
    for (index, d) in dets.iter().enumerate() {
        d.validate()
            .map_err(|reason| Error::InvalidDetection { index, reason })?;
    }
    if options.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParameter("IoU thresholds must lie in [0, 1]".into()));
    }
    let set = if options.filter.is_noop() {
        set.clone()
    } else {
        filter_instances(set, &options.filter)?
    };
    let parts = partition(dets, &set)?;

    let mut per_class_ap: BTreeMap<Class, Vec<Option<f64>>> = BTreeMap::new();
    let mut map_per_iou = Vec::with_capacity(options.iou_thresholds.len());
    let mut curves = Vec::new();
    let mut class_reports: BTreeMap<Class, ClassReport> = Class::ALL
        .iter()
        .map(|&c| {
            let num_gt = set.instances.iter().filter(|i| i.class == c).count();
            (c, ClassReport { class: c, num_gt, ap_per_iou: Vec::new(), ap50: None, ap75: None, ap: None, curves: Vec::new() })
        })
        .collect();

    for &t in &options.iou_thresholds {
        let matches = match_all(&parts, t);
        let per_class = class_curves(&parts, &matches);
        for (c, curve) in &per_class {
            per_class_ap.entry(*c).or_default().push(curve.ap);
        }
        map_per_iou.push(mean_defined(per_class.values().map(|c| c.ap)));
        if is_close(t, 0.5) || is_close(t, 0.75) {
            let name = curve_name(t);
            for (c, curve) in &per_class {
                class_reports.get_mut(c).expect("class").curves.push(NamedCurve {
                    name: format!("{c}/{name}"),
                    iou: t,
                    curve: curve.clone(),
                });
            }
            curves.push(NamedCurve {
                name,
                iou: t,
                curve: combine(&per_class, &parts, &matches, options.curve_mode),
            });
        }
    }

    let at = |v: &[Option<f64>], target: f64| {
        options
            .iou_thresholds
            .iter()
            .position(|&t| is_close(t, target))
            .and_then(|i| v[i])
    };
    for (c, aps) in per_class_ap {
        let r = class_reports.get_mut(&c).expect("class");
        r.ap50 = at(&aps, 0.5);
        r.ap75 = at(&aps, 0.75);
        r.ap = mean_defined(aps.iter().copied());
        r.ap_per_iou = aps;
    }

    if let Some(attribution_iou) = options.extreme_analysis {
        for t in [0.5, 0.75] {
            let cc = conditional::conditional_from_parts(&set, &parts, t, attribution_iou, options.curve_mode)?;
            let name = curve_name(t);
            curves.push(NamedCurve { name: format!("{name}/extreme-eliminated"), iou: t, curve: cc.extreme_eliminated });
            curves.push(NamedCurve { name: format!("{name}/other-eliminated"), iou: t, curve: cc.other_eliminated });
        }
    }

    Ok(EvalReport {
        iou_thresholds: options.iou_thresholds.clone(),
        ap50: at(&map_per_iou, 0.5),
        ap75: at(&map_per_iou, 0.75),
        ap: mean_defined(map_per_iou.iter().copied()),
        map_per_iou,
        per_class: class_reports.into_values().collect(),
        curves,
        curve_mode: options.curve_mode,
    })
}

fn is_close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}
