use std::path::Path;

use serde::Deserialize;

use lowlight_core::annotations::{AttributeKeys, ExtremeFilter};
use lowlight_core::eval::CurveMode;

use crate::error::CliError;

/// Optional TOML file. Keys use the flag names with underscores; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,

    pub count: Option<u64>,
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub photon_scale_min: Option<f64>,
    pub photon_scale_max: Option<f64>,
    pub patch_side: Option<u32>,

    pub mode: Option<String>,
    pub alpha_limit: Option<f64>,
    pub delta_limit: Option<f64>,
    pub patch_frac_min: Option<f64>,
    pub patch_frac_max: Option<f64>,
    pub block: Option<u32>,
    pub prob: Option<f64>,

    pub window: Option<usize>,
    pub sigma: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub dynamic_range: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,

    pub attr_container: Option<String>,
    pub attr_extreme: Option<String>,
    pub attr_truncated: Option<String>,
    pub attr_occluded: Option<String>,

    pub extreme_analysis: Option<bool>,
    pub attribution_iou: Option<f64>,
    pub extreme: Option<ExtremeFilter>,
    pub exclude_truncated: Option<bool>,
    pub exclude_occluded: Option<bool>,
    pub curve_mode: Option<CurveMode>,
    pub iou_thresholds: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Attribute key mapping; an empty container name reads flags from the annotation object.
pub fn attribute_keys(
    container: Option<String>,
    extreme: Option<String>,
    truncated: Option<String>,
    occluded: Option<String>,
    file: &FileConfig,
) -> AttributeKeys {
    let d = AttributeKeys::default();
    let container = pick(
        container,
        file.attr_container.clone(),
        d.container.clone().unwrap_or_default(),
    );
    AttributeKeys {
        container: (!container.is_empty()).then_some(container),
        extreme: pick(extreme, file.attr_extreme.clone(), d.extreme),
        truncated: pick(truncated, file.attr_truncated.clone(), d.truncated),
        occluded: pick(occluded, file.attr_occluded.clone(), d.occluded),
    }
}
