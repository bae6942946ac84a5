//! COCO-format ground truth with per-instance lighting flags, and COCO results-format detections.
//!
//! Flags live in each annotation's `"attributes"` object as booleans `"extreme"`,
//! `"truncated"` and `"occluded"`. [`AttributeKeys`] remaps the container and key names
//! for files that encode them differently; `0`/`1` integers are accepted as booleans.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{Error, Region, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Person,
    Bicycle,
    Car,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Person, Class::Bicycle, Class::Car];

    pub fn name(self) -> &'static str {
        match self {
            Class::Person => "person",
            Class::Bicycle => "bicycle",
            Class::Car => "car",
        }
    }

    pub fn from_name(name: &str) -> Option<Class> {
        Class::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels; serialized as a 4-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection with `[0, width] x [0, height]`, or `None` when nothing remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width);
        let y1 = (self.y + self.h).min(height);
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Pixel region with corners rounded to the nearest grid line, clipped to the image.
    pub fn to_region(&self, width: u32, height: u32) -> Option<Region> {
        let clamp_x = |v: f64| v.round().clamp(0.0, f64::from(width)) as u32;
        let clamp_y = |v: f64| v.round().clamp(0.0, f64::from(height)) as u32;
        let (x0, x1) = (clamp_x(self.x), clamp_x(self.x + self.w));
        let (y0, y1) = (clamp_y(self.y), clamp_y(self.y + self.h));
        Region::new(x0, y0, x1.checked_sub(x0)?, y1.checked_sub(y0)?).ok()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LightingFlags {
    pub extreme: Option<bool>,
    pub truncated: Option<bool>,
    pub occluded: Option<bool>,
}

impl LightingFlags {
    pub fn is_empty(&self) -> bool {
        self.extreme.is_none() && self.truncated.is_none() && self.occluded.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub class: Class,
    pub bbox: BBox,
    pub flags: LightingFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(skip)]
    pub class: Class,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    pub images: Vec<ImageInfo>,
    pub instances: Vec<Instance>,
    pub categories: Vec<Category>,
}

/// Where lighting flags are read from and written to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeKeys {
    /// Sub-object holding the flags; `None` reads them from the annotation object itself.
    pub container: Option<String>,
    pub extreme: String,
    pub truncated: String,
    pub occluded: String,
}

impl Default for AttributeKeys {
    fn default() -> Self {
        Self {
            container: Some("attributes".into()),
            extreme: "extreme".into(),
            truncated: "truncated".into(),
            occluded: "occluded".into(),
        }
    }
}

/// Result of [`load_annotations_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedAnnotations {
    pub set: AnnotationSet,
    /// Boxes that extended past their image and were clipped.
    pub clipped_boxes: usize,
}

#[derive(Deserialize)]
struct RawCategory {
    id: u64,
    name: String,
}

#[derive(Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Deserialize)]
struct RawFile {
    #[serde(default)]
    images: Vec<ImageInfo>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    categories: Vec<RawCategory>,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn flag_value(v: &Value, key: &str, ann_id: u64) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        other => Err(Error::Schema(format!(
            "annotation {ann_id}: flag {key:?} must be boolean, got {other}"
        ))),
    }
}

fn read_flags(extra: &Map<String, Value>, keys: &AttributeKeys, ann_id: u64) -> Result<LightingFlags> {
    let holder = match &keys.container {
        Some(name) => match extra.get(name) {
            None | Some(Value::Null) => return Ok(LightingFlags::default()),
            Some(Value::Object(m)) => m,
            Some(other) => {
                return Err(Error::Schema(format!(
                    "annotation {ann_id}: {name:?} must be an object, got {other}"
                )))
            }
        },
        None => extra,
    };
    let get = |key: &str| -> Result<Option<bool>> {
        match holder.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => flag_value(v, key, ann_id).map(Some),
        }
    };
    Ok(LightingFlags {
        extreme: get(&keys.extreme)?,
        truncated: get(&keys.truncated)?,
        occluded: get(&keys.occluded)?,
    })
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    load_annotations_with(path, &AttributeKeys::default()).map(|l| l.set)
}

/// Loads and validates a COCO annotation file.
///
/// Categories must name one of the known classes. Boxes are clipped to their image;
/// the number of clipped boxes is reported and logged.
pub fn load_annotations_with(path: impl AsRef<Path>, keys: &AttributeKeys) -> Result<LoadedAnnotations> {
    let path = path.as_ref();
    let raw: RawFile = serde_json::from_value(read_json(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;

    let mut categories = Vec::with_capacity(raw.categories.len());
    let mut class_of = HashMap::new();
    for c in raw.categories {
        let class = Class::from_name(&c.name)
            .ok_or_else(|| Error::Schema(format!("unknown category name {:?} (id {})", c.name, c.id)))?;
        if class_of.insert(c.id, class).is_some() {
            return Err(Error::Schema(format!("duplicate category id {}", c.id)));
        }
        categories.push(Category { id: c.id, name: c.name, class });
    }

    let mut dims = HashMap::new();
    for img in &raw.images {
        if img.width == 0 || img.height == 0 {
            return Err(Error::Schema(format!("image {} has zero extent", img.id)));
        }
        if dims.insert(img.id, (img.width, img.height)).is_some() {
            return Err(Error::Schema(format!("duplicate image id {}", img.id)));
        }
    }

    let mut clipped_boxes = 0;
    let mut seen_ids = HashSet::new();
    let mut instances = Vec::with_capacity(raw.annotations.len());
    for ann in raw.annotations {
        if !seen_ids.insert(ann.id) {
            return Err(Error::Schema(format!("duplicate annotation id {}", ann.id)));
        }
        let class = *class_of
            .get(&ann.category_id)
            .ok_or(Error::UnknownCategory(ann.category_id))?;
        let &(w, h) = dims.get(&ann.image_id).ok_or_else(|| {
            Error::Schema(format!("annotation {} references missing image {}", ann.id, ann.image_id))
        })?;
        let bbox = BBox::from(ann.bbox);
        if !bbox.is_valid() {
            return Err(Error::Schema(format!("annotation {} has degenerate bbox {:?}", ann.id, ann.bbox)));
        }
        let clipped = bbox.clip(f64::from(w), f64::from(h)).ok_or_else(|| {
            Error::Schema(format!("annotation {} lies outside image {}", ann.id, ann.image_id))
        })?;
        if clipped != bbox {
            clipped_boxes += 1;
        }
        instances.push(Instance {
            id: ann.id,
            image_id: ann.image_id,
            category_id: ann.category_id,
            class,
            bbox: clipped,
            flags: read_flags(&ann.extra, keys, ann.id)?,
        });
    }
    if clipped_boxes > 0 {
        log::warn!("{}: clipped {clipped_boxes} boxes to image bounds", path.display());
    }
    Ok(LoadedAnnotations {
        set: AnnotationSet {
            images: raw.images,
            instances,
            categories,
        },
        clipped_boxes,
    })
}

impl AnnotationSet {
    /// COCO JSON value, flags written under `keys`.
    pub fn to_json(&self, keys: &AttributeKeys) -> Value {
        let annotations: Vec<Value> = self
            .instances
            .iter()
            .map(|inst| {
                let mut obj = Map::new();
                obj.insert("id".into(), inst.id.into());
                obj.insert("image_id".into(), inst.image_id.into());
                obj.insert("category_id".into(), inst.category_id.into());
                obj.insert("bbox".into(), serde_json::to_value(inst.bbox).expect("bbox"));
                obj.insert("area".into(), inst.bbox.area().into());
                obj.insert("iscrowd".into(), 0.into());
                let mut flags = Map::new();
                for (key, val) in [
                    (&keys.extreme, inst.flags.extreme),
                    (&keys.truncated, inst.flags.truncated),
                    (&keys.occluded, inst.flags.occluded),
                ] {
                    if let Some(v) = val {
                        flags.insert(key.clone(), v.into());
                    }
                }
                if !flags.is_empty() {
                    match &keys.container {
                        Some(name) => {
                            obj.insert(name.clone(), Value::Object(flags));
                        }
                        None => obj.extend(flags),
                    }
                }
                Value::Object(obj)
            })
            .collect();
        serde_json::json!({
            "images": self.images,
            "annotations": annotations,
            "categories": self.categories,
        })
    }

    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn class_of(&self, category_id: u64) -> Option<Class> {
        self.categories.iter().find(|c| c.id == category_id).map(|c| c.class)
    }
}

pub fn save_annotations(set: &AnnotationSet, path: impl AsRef<Path>, keys: &AttributeKeys) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&set.to_json(keys)).expect("annotation json");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One scored box from a detector, COCO results format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.score.is_finite() && (0.0..=1.0).contains(&self.score)) {
            return Err(format!("score {} outside [0, 1]", self.score));
        }
        if !self.bbox.is_valid() {
            return Err(format!("degenerate bbox {:?}", <[f64; 4]>::from(self.bbox)));
        }
        Ok(())
    }
}

/// Loads a JSON array of `{image_id, category_id, bbox, score}`, preserving order.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let entries = match read_json(path)? {
        Value::Array(a) => a,
        _ => return Err(Error::Schema(format!("{}: detections must be a JSON array", path.display()))),
    };
    entries
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            let det: Detection = serde_json::from_value(v)
                .map_err(|e| Error::InvalidDetection { index, reason: e.to_string() })?;
            det.validate()
                .map_err(|reason| Error::InvalidDetection { index, reason })?;
            Ok(det)
        })
        .collect()
}

pub fn save_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(dets).expect("detections json");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    /// Instances carrying at least one flag.
    pub annotated: usize,
    pub extreme: usize,
    pub truncated: usize,
    pub occluded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub images: usize,
    pub instances: usize,
    pub per_class: BTreeMap<Class, usize>,
    pub flags: Option<FlagCounts>,
}

pub fn dataset_stats(set: &AnnotationSet) -> DatasetStats {
    let mut per_class: BTreeMap<Class, usize> = Class::ALL.iter().map(|&c| (c, 0)).collect();
    let mut flags = FlagCounts::default();
    for inst in &set.instances {
        *per_class.entry(inst.class).or_default() += 1;
        if !inst.flags.is_empty() {
            flags.annotated += 1;
        }
        flags.extreme += usize::from(inst.flags.extreme == Some(true));
        flags.truncated += usize::from(inst.flags.truncated == Some(true));
        flags.occluded += usize::from(inst.flags.occluded == Some(true));
    }
    DatasetStats {
        images: set.images.len(),
        instances: set.instances.len(),
        per_class,
        flags: (flags.annotated > 0).then_some(flags),
    }
}

impl DatasetStats {
    /// Element-wise sum, for totals over several files.
    pub fn merge(&self, other: &DatasetStats) -> DatasetStats {
        let mut per_class = self.per_class.clone();
        for (c, n) in &other.per_class {
            *per_class.entry(*c).or_default() += n;
        }
        let flags = match (self.flags, other.flags) {
            (None, None) => None,
            (a, b) => {
                let (a, b) = (a.unwrap_or_default(), b.unwrap_or_default());
                Some(FlagCounts {
                    annotated: a.annotated + b.annotated,
                    extreme: a.extreme + b.extreme,
                    truncated: a.truncated + b.truncated,
                    occluded: a.occluded + b.occluded,
                })
            }
        };
        DatasetStats {
            images: self.images + other.images,
            instances: self.instances + other.instances,
            per_class,
            flags,
        }
    }
}

/// Which instances to keep with respect to the extreme low-light flag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremeFilter {
    #[default]
    All,
    Only,
    Exclude,
}

impl std::str::FromStr for ExtremeFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(ExtremeFilter::All),
            "only" => Ok(ExtremeFilter::Only),
            "exclude" => Ok(ExtremeFilter::Exclude),
            _ => Err(format!("expected all, only or exclude, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceFilter {
    pub extreme: ExtremeFilter,
    pub exclude_truncated: bool,
    pub exclude_occluded: bool,
}

impl InstanceFilter {
    pub fn is_noop(&self) -> bool {
        self.extreme == ExtremeFilter::All && !self.exclude_truncated && !self.exclude_occluded
    }

    fn keeps(&self, flags: &LightingFlags) -> bool {
        let extreme_ok = match self.extreme {
            ExtremeFilter::All => true,
            ExtremeFilter::Only => flags.extreme == Some(true),
            ExtremeFilter::Exclude => flags.extreme == Some(false),
        };
        extreme_ok
            && !(self.exclude_truncated && flags.truncated == Some(true))
            && !(self.exclude_occluded && flags.occluded == Some(true))
    }
}

/// Drops instances failing the filter; images and categories are kept.
///
/// Every instance must carry each flag the filter consults.
pub fn filter_instances(set: &AnnotationSet, filter: &InstanceFilter) -> Result<AnnotationSet> {
    for inst in &set.instances {
        let missing = [
            (filter.extreme != ExtremeFilter::All, inst.flags.extreme, "extreme"),
            (filter.exclude_truncated, inst.flags.truncated, "truncated"),
            (filter.exclude_occluded, inst.flags.occluded, "occluded"),
        ]
        .into_iter()
        .find(|(needed, value, _)| *needed && value.is_none());
        if let Some((_, _, name)) = missing {
            return Err(Error::MissingFlags(format!(
                "filter on {name:?} but instance {} has no such flag",
                inst.id
            )));
        }
    }
    Ok(AnnotationSet {
        images: set.images.clone(),
        instances: set.instances.iter().filter(|i| filter.keeps(&i.flags)).cloned().collect(),
        categories: set.categories.clone(),
    })
}
