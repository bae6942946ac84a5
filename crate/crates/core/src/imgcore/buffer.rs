use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::{Error, Result};

pub const CHANNELS: usize = 3;

/// 8-bit interleaved RGB raster, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    /// Wraps interleaved RGB bytes. Fails unless `data.len() == width * height * 3`.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} RGB needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds from a row-major `height x width x channels` byte array with 1 (gray) or 3 channels.
    pub fn from_hwc(height: u32, width: u32, channels: usize, data: &[u8]) -> Result<Self> {
        match channels {
            3 => Self::new(width, height, data.to_vec()),
            1 => {
                if data.len() != width as usize * height as usize {
                    return Err(Error::ShapeMismatch(format!(
                        "{width}x{height} gray needs {} bytes, got {}",
                        width as usize * height as usize,
                        data.len()
                    )));
                }
                Self::new(width, height, data.iter().flat_map(|&v| [v, v, v]).collect())
            }
            c => Err(Error::ShapeMismatch(format!(
                "expected 1 or 3 channels, got {c}"
            ))),
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bytes per row.
    pub fn stride(&self) -> usize {
        self.width as usize * CHANNELS
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + CHANNELS].copy_from_slice(&rgb);
    }

    /// Whole-image region.
    pub fn bounds(&self) -> Region {
        Region {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }

    /// Copies `region` out into a new buffer.
    pub fn crop(&self, region: Region) -> Result<ImageBuffer> {
        region.check_within(self.width, self.height)?;
        let row_bytes = region.w as usize * CHANNELS;
        let mut data = Vec::with_capacity(row_bytes * region.h as usize);
        for y in region.y..region.y + region.h {
            let o = self.offset(region.x, y);
            data.extend_from_slice(&self.data[o..o + row_bytes]);
        }
        ImageBuffer::new(region.w, region.h, data)
    }

    /// Mutable byte rows covered by `region`, top to bottom. Caller guarantees bounds.
    pub(crate) fn region_rows_mut(&mut self, region: Region) -> impl Iterator<Item = &mut [u8]> {
        let stride = self.stride();
        let x0 = region.x as usize * CHANNELS;
        let x1 = x0 + region.w as usize * CHANNELS;
        self.data
            .chunks_exact_mut(stride)
            .skip(region.y as usize)
            .take(region.h as usize)
            .map(move |row| &mut row[x0..x1])
    }
}

/// Axis-aligned pixel rectangle, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u32; 4]", try_from = "[u32; 4]")]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidParameter(format!(
                "region extent must be positive, got {w}x{h}"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height);
        if fits {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                region: *self,
                width,
                height,
            })
        }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }
}

impl From<Region> for [u32; 4] {
    fn from(r: Region) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl TryFrom<[u32; 4]> for Region {
    type Error = Error;

    fn try_from(v: [u32; 4]) -> Result<Self> {
        Region::new(v[0], v[1], v[2], v[3])
    }
}

/// Copies a `side x side` patch whose top-left corner is uniform over all valid positions.
///
/// Draws the column offset first, then the row offset.
pub fn extract_random_patch(
    img: &ImageBuffer,
    side: u32,
    rng: &mut RngStream,
) -> Result<(ImageBuffer, Region)> {
    if side == 0 || side > img.width().min(img.height()) {
        return Err(Error::InvalidParameter(format!(
            "patch side {side} does not fit in {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let x = rng.below(u64::from(img.width() - side) + 1) as u32;
    let y = rng.below(u64::from(img.height() - side) + 1) as u32;
    let region = Region::new(x, y, side, side)?;
    Ok((img.crop(region)?, region))
}
