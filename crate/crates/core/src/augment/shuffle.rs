use serde::{Deserialize, Serialize};

use crate::imgcore::CHANNELS;
use crate::{Error, ImageBuffer, Region, Result, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShuffleConfig {
    /// Block side in pixels.
    pub block: u32,
    /// Probability that a region is scrambled.
    pub prob: f64,
}

impl Default for ShuffleConfig {
    fn default() -> Self {
        Self { block: 16, prob: 0.5 }
    }
}

impl ShuffleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block == 0 {
            return Err(Error::InvalidParameter("block must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.prob) {
            return Err(Error::InvalidParameter(format!(
                "prob must be in [0, 1], got {}",
                self.prob
            )));
        }
        Ok(())
    }
}

/// Permutes the full `block x block` cells of `region` in place: destination cell `j`
/// (row-major, anchored at the region's top-left) receives source cell `perm[j]`.
/// Pixels in partial edge cells are left alone.
pub fn shuffle_region(img: &mut ImageBuffer, region: Region, block: u32, perm: &[usize]) -> Result<()> {
    region.check_within(img.width(), img.height())?;
    let cols = (region.w / block) as usize;
    let rows = (region.h / block) as usize;
    if perm.len() != cols * rows {
        return Err(Error::InvalidParameter(format!(
            "permutation of length {} for {} blocks",
            perm.len(),
            cols * rows
        )));
    }
    let source = img.clone();
    let stride = img.stride();
    let row_bytes = block as usize * CHANNELS;
    let cell_origin = |cell: usize| {
        let bx = region.x as usize + (cell % cols) * block as usize;
        let by = region.y as usize + (cell / cols) * block as usize;
        by * stride + bx * CHANNELS
    };
    let dst = img.data_mut();
    for (to, &from) in perm.iter().enumerate() {
        if to == from {
            continue;
        }
        let (d0, s0) = (cell_origin(to), cell_origin(from));
        for r in 0..block as usize {
            let (d, s) = (d0 + r * stride, s0 + r * stride);
            dst[d..d + row_bytes].copy_from_slice(&source.data()[s..s + row_bytes]);
        }
    }
    Ok(())
}

/// Scrambles object regions block-wise.
///
/// Regions are processed in order. Each one consumes a Bernoulli(`prob`) draw; a selected
/// region then has its full blocks shuffled by Fisher-Yates. Overlapping regions see the
/// result of earlier ones.
pub fn block_shuffle(
    img: &ImageBuffer,
    regions: &[Region],
    cfg: &ShuffleConfig,
    rng: &mut RngStream,
) -> Result<ImageBuffer> {
    cfg.validate()?;
    for r in regions {
        r.check_within(img.width(), img.height())?;
    }
    let mut out = img.clone();
    for &region in regions {
        if !rng.bernoulli(cfg.prob) {
            continue;
        }
        let blocks = (region.w / cfg.block) as usize * (region.h / cfg.block) as usize;
        if blocks < 2 {
            continue;
        }
        let mut perm: Vec<usize> = (0..blocks).collect();
        rng.shuffle(&mut perm);
        shuffle_region(&mut out, region, cfg.block, &perm)?;
    }
    Ok(out)
}
