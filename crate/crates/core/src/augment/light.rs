use serde::{Deserialize, Serialize};

use crate::{Error, ImageBuffer, Region, Result, RngStream};

/// Patch-wise brightness/contrast jitter.
///
/// Each tile gets a gain `1 + a` with `a` in `[-alpha_limit, alpha_limit]` and an
/// offset `d * 255` with `d` in `[-delta_limit, delta_limit]`, applied as
/// `gain * (v + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightAugConfig {
    pub alpha_limit: f64,
    pub delta_limit: f64,
    /// Tile side as a fraction of `min(width, height)`.
    pub patch_frac_min: f64,
    pub patch_frac_max: f64,
}

impl Default for LightAugConfig {
    fn default() -> Self {
        Self {
            alpha_limit: 0.3,
            delta_limit: 0.3,
            patch_frac_min: 0.04,
            patch_frac_max: 0.20,
        }
    }
}

impl LightAugConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha_limit) {
            return Err(Error::InvalidParameter(format!(
                "alpha_limit must be in [0, 1), got {}",
                self.alpha_limit
            )));
        }
        if !(0.0..=1.0).contains(&self.delta_limit) {
            return Err(Error::InvalidParameter(format!(
                "delta_limit must be in [0, 1], got {}",
                self.delta_limit
            )));
        }
        let (lo, hi) = (self.patch_frac_min, self.patch_frac_max);
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < patch_frac_min <= patch_frac_max <= 1, got {lo} and {hi}"
            )));
        }
        Ok(())
    }
}

/// Tiles of side `side` covering the image from the top-left, row-major; edge tiles are clipped.
pub fn light_tiles(width: u32, height: u32, side: u32) -> impl Iterator<Item = Region> {
    let side = side.max(1);
    (0..height).step_by(side as usize).flat_map(move |y| {
        (0..width).step_by(side as usize).map(move |x| Region {
            x,
            y,
            w: side.min(width - x),
            h: side.min(height - y),
        })
    })
}

/// Sets every value `v` in `tile` to `clamp(round((1 + a) * (v + d * 255)), 0, 255)`.
pub fn apply_light_tile(img: &mut ImageBuffer, tile: Region, a: f64, d: f64) -> Result<()> {
    tile.check_within(img.width(), img.height())?;
    let gain = 1.0 + a;
    let offset = d * 255.0;
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        *out = (gain * (v as f64 + offset)).round().clamp(0.0, 255.0) as u8;
    }
    for row in img.region_rows_mut(tile) {
        for v in row {
            *v = lut[*v as usize];
        }
    }
    Ok(())
}

/// Draws one tile side for the whole call, then `a` and `d` for each tile in row-major order.
pub fn patch_light_augment(
    img: &ImageBuffer,
    cfg: &LightAugConfig,
    rng: &mut RngStream,
) -> Result<ImageBuffer> {
    cfg.validate()?;
    let short = img.width().min(img.height());
    let frac = rng.uniform(cfg.patch_frac_min, cfg.patch_frac_max);
    let side = ((frac * f64::from(short)).round() as u32).clamp(1, short);
    let mut out = img.clone();
    for tile in light_tiles(img.width(), img.height(), side) {
        let a = rng.uniform(-cfg.alpha_limit, cfg.alpha_limit);
        let d = rng.uniform(-cfg.delta_limit, cfg.delta_limit);
        apply_light_tile(&mut out, tile, a, d)?;
    }
    Ok(out)
}
