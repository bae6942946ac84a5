use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{recall_grid, CurveMode, PrCurve};
use crate::annotations::Class;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub name: String,
    pub iou: f64,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: Class,
    pub num_gt: usize,
    /// AP at each configured IoU threshold; `None` when the class has no ground truth.
    pub ap_per_iou: Vec<Option<f64>>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap: Option<f64>,
    pub curves: Vec<NamedCurve>,
}

/// Evaluation summary. `None` APs mean no ground truth was available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap: Option<f64>,
    /// Class-mean AP at each threshold.
    pub map_per_iou: Vec<Option<f64>>,
    pub per_class: Vec<ClassReport>,
    /// Combined curves (`C50`, `C75`, and elimination curves when requested).
    pub curves: Vec<NamedCurve>,
    pub curve_mode: CurveMode,
}

impl EvalReport {
    /// Combined curves followed by per-class curves.
    pub fn all_curves(&self) -> impl Iterator<Item = &NamedCurve> {
        self.curves
            .iter()
            .chain(self.per_class.iter().flat_map(|c| c.curves.iter()))
    }

    /// CSV with header `curve,iou,recall,precision`; undefined curves contribute no rows.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("curve,iou,recall,precision\n");
        for nc in self.all_curves() {
            for (r, p) in recall_grid().zip(&nc.curve.precision) {
                writeln!(out, "{},{},{:.2},{}", nc.name, nc.iou, r, p).expect("string write");
            }
        }
        out
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<EvalReport> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn write_report_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).expect("report json");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_curves_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.curves_csv()).map_err(|e| Error::io(path, e))
}
