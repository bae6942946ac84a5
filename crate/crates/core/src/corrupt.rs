//! Restoration-pair synthesis: uniform posterization followed by Poisson shot noise.
//!
//! A clean patch is reduced to `k` gray levels per channel, then every channel value
//! `v` is replaced by `Poisson(v * s) / s` for a photon scale `s`. Small `k` and small
//! `s` give severe corruption. [`generate_restoration_dataset`] turns a directory of
//! well-lit images into `(corrupted, clean)` PNG pairs plus a JSONL manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imgcore::{extract_random_patch, list_images, load_image, save_png};
use crate::{Error, ImageBuffer, Region, Result, RngStream};

/// Below this mean the Poisson sampler inverts the CDF; at or above it a rounded normal is used.
pub const POISSON_NORMAL_SWITCH: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub photon_scale_min: f64,
    pub photon_scale_max: f64,
    pub patch_side: u32,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 8,
            photon_scale_min: 0.05,
            photon_scale_max: 1.0,
            patch_side: 256,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.k_min && self.k_min <= self.k_max && self.k_max <= 256) {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= k_min <= k_max <= 256, got k_min={} k_max={}",
                self.k_min, self.k_max
            )));
        }
        let (lo, hi) = (self.photon_scale_min, self.photon_scale_max);
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < photon_scale_min <= photon_scale_max, got {lo} and {hi}"
            )));
        }
        if self.patch_side == 0 {
            return Err(Error::InvalidParameter("patch_side must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters that fully determine one corrupted patch given its clean source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub k: u32,
    pub photon_scale: f64,
    /// Seed of the noise stream (stream id 0).
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestorationPair {
    pub corrupted: ImageBuffer,
    pub clean: ImageBuffer,
    pub record: CorruptionRecord,
}

fn check_levels(k: u32) -> Result<()> {
    if (2..=256).contains(&k) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gray level count must be in [2, 256], got {k}"
        )))
    }
}

/// Lookup table for `k`-level uniform quantization.
///
/// Segment `i = floor(v * k / 256)` is reconstructed at `round(i * 255 / (k - 1))`.
/// The mapping is idempotent for `k <= 27` and `k = 256`; above 27 some reconstruction
/// levels round into the neighbouring segment.
pub fn posterize_table(k: u32) -> Result<[u8; 256]> {
    check_levels(k)?;
    let k = k as usize;
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let segment = (v * k / 256).min(k - 1);
        // round-half-up of segment * 255 / (k - 1) in integers
        *out = ((2 * segment * 255 + (k - 1)) / (2 * (k - 1))) as u8;
    }
    Ok(lut)
}

pub fn posterize(img: &ImageBuffer, k: u32) -> Result<ImageBuffer> {
    let lut = posterize_table(k)?;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = lut[*v as usize];
    }
    Ok(out)
}

/// Draws from Poisson(`lambda`).
///
/// CDF inversion on a single uniform for `lambda < 30`, otherwise
/// `max(0, round(lambda + sqrt(lambda) * z))` with `z` standard normal.
pub fn sample_poisson(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda < POISSON_NORMAL_SWITCH {
        let u = rng.next_f64();
        let mut p = libm::exp(-lambda);
        let mut cdf = p;
        let mut x = 0u64;
        // cdf can saturate just below 1.0 in floating point; the cap ends the tail walk.
        while u > cdf && x < 1_000 {
            x += 1;
            p *= lambda / x as f64;
            cdf += p;
        }
        x
    } else {
        let z = rng.standard_normal();
        libm::round(lambda + libm::sqrt(lambda) * z).max(0.0) as u64
    }
}

/// Per channel value `v`: `clamp(round(Poisson(v * s) / s), 0, 255)`, drawn in buffer order.
pub fn shot_noise(img: &ImageBuffer, photon_scale: f64, rng: &mut RngStream) -> Result<ImageBuffer> {
    if !(photon_scale.is_finite() && photon_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "photon_scale must be positive, got {photon_scale}"
        )));
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        let photons = sample_poisson(f64::from(*v) * photon_scale, rng);
        *v = libm::round(photons as f64 / photon_scale).clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

/// Applies a recorded corruption.
pub fn apply_record(clean: &ImageBuffer, record: &CorruptionRecord) -> Result<ImageBuffer> {
    let levels = posterize(clean, record.k)?;
    shot_noise(&levels, record.photon_scale, &mut RngStream::new(record.seed, 0))
}

/// Draws `k` uniformly from `[k_min, k_max]`, the photon scale log-uniformly, and a noise seed,
/// then corrupts `clean` with them.
pub fn corrupt_patch(
    clean: &ImageBuffer,
    cfg: &CorruptionConfig,
    rng: &mut RngStream,
) -> Result<RestorationPair> {
    cfg.validate()?;
    let k = rng.range_inclusive(u64::from(cfg.k_min), u64::from(cfg.k_max)) as u32;
    let u = rng.next_f64();
    let photon_scale = if cfg.photon_scale_min == cfg.photon_scale_max {
        cfg.photon_scale_min
    } else {
        let (lo, hi) = (libm::log(cfg.photon_scale_min), libm::log(cfg.photon_scale_max));
        libm::exp(lo + u * (hi - lo)).clamp(cfg.photon_scale_min, cfg.photon_scale_max)
    };
    let record = CorruptionRecord {
        k,
        photon_scale,
        seed: rng.next_u64(),
    };
    Ok(RestorationPair {
        corrupted: apply_record(clean, &record)?,
        clean: clean.clone(),
        record,
    })
}

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: u64,
    /// Source file name relative to the source directory.
    pub source: String,
    pub region: Region,
    pub k: u32,
    pub photon_scale: f64,
    pub seed: u64,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn pair_file_name(index: u64) -> String {
    format!("{index:06}.png")
}

struct Source {
    name: String,
    image: ImageBuffer,
}

fn load_sources(src_dir: &Path, side: u32) -> Result<Vec<Source>> {
    let mut readable = 0usize;
    let mut sources = Vec::new();
    for path in list_images(src_dir)? {
        let image = match load_image(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        readable += 1;
        if image.width().min(image.height()) >= side {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            sources.push(Source { name, image });
        }
    }
    if readable == 0 {
        return Err(Error::EmptySource(src_dir.to_path_buf()));
    }
    if sources.is_empty() {
        return Err(Error::SourcesTooSmall {
            dir: src_dir.to_path_buf(),
            side,
        });
    }
    Ok(sources)
}

fn make_pair(sources: &[Source], cfg: &CorruptionConfig, master_seed: u64, index: u64) -> Result<(ManifestRecord, RestorationPair)> {
    let mut rng = RngStream::for_item(master_seed, index);
    let src = &sources[rng.below(sources.len() as u64) as usize];
    let (patch, region) = extract_random_patch(&src.image, cfg.patch_side, &mut rng)?;
    let pair = corrupt_patch(&patch, cfg, &mut rng)?;
    let record = ManifestRecord {
        index,
        source: src.name.clone(),
        region,
        k: pair.record.k,
        photon_scale: pair.record.photon_scale,
        seed: pair.record.seed,
    };
    Ok((record, pair))
}

/// Writes `count` pairs as `out_dir/{clean,corrupt}/NNNNNN.png` plus `out_dir/manifest.jsonl`.
///
/// Pair `i` uses `RngStream::for_item(master_seed, i)`: it picks a source image, a patch
/// position and the corruption parameters from that stream alone, so `jobs` only changes
/// wall time. `jobs = None` uses the global rayon pool.
pub fn generate_restoration_dataset(
    src_dir: impl AsRef<Path>,
    cfg: &CorruptionConfig,
    out_dir: impl AsRef<Path>,
    count: u64,
    master_seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<ManifestRecord>> {
    cfg.validate()?;
    let (src_dir, out_dir) = (src_dir.as_ref(), out_dir.as_ref());
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let records = if count == 0 {
        Vec::new()
    } else {
        let sources = load_sources(src_dir, cfg.patch_side)?;
        let clean_dir = out_dir.join("clean");
        let corrupt_dir = out_dir.join("corrupt");
        for d in [&clean_dir, &corrupt_dir] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let work = || {
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let (record, pair) = make_pair(&sources, cfg, master_seed, i)?;
                    let name = pair_file_name(i);
                    save_png(&pair.clean, clean_dir.join(&name))?;
                    save_png(&pair.corrupted, corrupt_dir.join(&name))?;
                    Ok(record)
                })
                .collect::<Result<Vec<_>>>()
        };
        run_with_jobs(jobs, work)?
    };

    write_manifest(&out_dir.join(MANIFEST_FILE), &records)?;
    Ok(records)
}

/// Runs `f` on a dedicated pool of `jobs` threads, or on the global pool.
pub fn run_with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::InvalidParameter("jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

fn write_manifest(path: &PathBuf, records: &[ManifestRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("manifest record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}
