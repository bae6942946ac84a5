//! Restoration quality: pixel MSE, SSIM, and the weighted restoration loss
//! `mse + lambda1 * (1 - ssim) / 2 + lambda2 * feature_distance`.

use serde::{Deserialize, Serialize};

use crate::imgcore::CHANNELS;
use crate::{Error, ImageBuffer, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "ssim window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0 && self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidParameter(
                "ssim sigma, k1, k2 and dynamic_range must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps.
    fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 >= 0.0 && self.lambda2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "loss weights must be nonnegative, got {} and {}",
                self.lambda1, self.lambda2
            )))
        }
    }
}

/// Perceptual distance between two images, e.g. a deep-feature (VGG) distance.
///
/// Implementations must return a nonnegative value, be symmetric, and give 0 for identical inputs.
pub trait FeatureDistance {
    fn distance(&self, a: &ImageBuffer, b: &ImageBuffer) -> Result<f64>;
}

impl<F> FeatureDistance for F
where
    F: Fn(&ImageBuffer, &ImageBuffer) -> f64,
{
    fn distance(&self, a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
        Ok(self(a, b))
    }
}

fn check_shape(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )))
    }
}

/// Mean of `(a/255 - b/255)^2` over all channel values.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_shape(a, b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = u64::from(x.abs_diff(y));
            d * d
        })
        .sum();
    Ok(sum as f64 / (255.0 * 255.0) / a.data().len() as f64)
}

/// Valid-mode separable filtering of one channel plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + n]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Gaussian-window SSIM averaged over valid window positions, then over channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    check_shape(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < cfg.window || h < cfg.window {
        return Err(Error::ShapeMismatch(format!(
            "{w}x{h} image is smaller than the {0}x{0} ssim window",
            cfg.window
        )));
    }
    let kernel = cfg.kernel();
    let (c1, c2) = (cfg.c1(), cfg.c2());

    let mut total = 0.0;
    for c in 0..CHANNELS {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(CHANNELS).map(|&v| f64::from(v)).collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(CHANNELS).map(|&v| f64::from(v)).collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<f64>>();

        let mu_a = filter_valid(&pa, w, h, &kernel);
        let mu_b = filter_valid(&pb, w, h, &kernel);
        let e_aa = filter_valid(&prod(&pa, &pa), w, h, &kernel);
        let e_bb = filter_valid(&prod(&pb, &pb), w, h, &kernel);
        let e_ab = filter_valid(&prod(&pa, &pb), w, h, &kernel);

        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / CHANNELS as f64)
}

/// `mse + lambda1 * (1 - ssim) / 2 + lambda2 * fd`, with the feature term dropped when `fd` is `None`.
pub fn restoration_loss(
    a: &ImageBuffer,
    b: &ImageBuffer,
    weights: &LossWeights,
    ssim_cfg: &SsimConfig,
    fd: Option<&dyn FeatureDistance>,
) -> Result<f64> {
    weights.validate()?;
    let mut loss = mse(a, b)?;
    if weights.lambda1 != 0.0 {
        loss += weights.lambda1 * (1.0 - ssim(a, b, ssim_cfg)?) / 2.0;
    }
    if let Some(fd) = fd {
        if weights.lambda2 != 0.0 {
            loss += weights.lambda2 * fd.distance(a, b)?;
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;

    fn random_image(w: u32, h: u32, seed: u64) -> ImageBuffer {
        let mut rng = RngStream::new(seed, 5);
        ImageBuffer::from_fn(w, h, |_, _| {
            let b = rng.next_u64().to_le_bytes();
            [b[0], b[1], b[2]]
        })
        .unwrap()
    }

    #[test]
    fn mse_extremes() {
        let black = ImageBuffer::filled(4, 4, [0; 3]).unwrap();
        let white = ImageBuffer::filled(4, 4, [255; 3]).unwrap();
        assert_eq!(mse(&black, &black).unwrap(), 0.0);
        assert_eq!(mse(&black, &white).unwrap(), 1.0);
    }

    #[test]
    fn mse_matches_double_loop() {
        let a = random_image(8, 8, 1);
        let b = random_image(8, 8, 2);
        let mut acc = 0.0;
        for y in 0..8 {
            for x in 0..8 {
                let (pa, pb) = (a.pixel(x, y), b.pixel(x, y));
                for c in 0..3 {
                    acc += (f64::from(pa[c]) / 255.0 - f64::from(pb[c]) / 255.0).powi(2);
                }
            }
        }
        assert!((mse(&a, &b).unwrap() - acc / 192.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = random_image(8, 8, 1);
        let b = random_image(8, 9, 1);
        assert!(matches!(mse(&a, &b), Err(Error::ShapeMismatch(_))));
        assert!(ssim(&a, &b, &SsimConfig::default()).is_err());
    }

    #[test]
    fn ssim_self_and_symmetry() {
        let cfg = SsimConfig::default();
        let a = random_image(24, 19, 3);
        let b = random_image(24, 19, 4);
        assert!((ssim(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-9);
        let (ab, ba) = (ssim(&a, &b, &cfg).unwrap(), ssim(&b, &a, &cfg).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 0.2);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let cfg = SsimConfig::default();
        let black = ImageBuffer::filled(16, 16, [0; 3]).unwrap();
        let white = ImageBuffer::filled(16, 16, [255; 3]).unwrap();
        let expected = 6.5025 / (65025.0 + 6.5025);
        assert!((ssim(&black, &white, &cfg).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn ssim_too_small() {
        let a = random_image(10, 20, 1);
        assert!(matches!(ssim(&a, &a, &SsimConfig::default()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn ssim_config_validation() {
        let a = random_image(16, 16, 1);
        for cfg in [
            SsimConfig { window: 4, ..Default::default() },
            SsimConfig { window: 1, ..Default::default() },
            SsimConfig { sigma: 0.0, ..Default::default() },
        ] {
            assert!(ssim(&a, &a, &cfg).is_err());
        }
    }

    #[test]
    fn loss_reductions() {
        let cfg = SsimConfig::default();
        let a = random_image(16, 16, 7);
        let b = random_image(16, 16, 8);
        let zero = LossWeights { lambda1: 0.0, lambda2: 0.0 };
        assert_eq!(restoration_loss(&a, &b, &zero, &cfg, None).unwrap(), mse(&a, &b).unwrap());
        assert_eq!(restoration_loss(&a, &a, &LossWeights::default(), &cfg, None).unwrap(), 0.0);

        let black = ImageBuffer::filled(16, 16, [0; 3]).unwrap();
        let white = ImageBuffer::filled(16, 16, [255; 3]).unwrap();
        let w = LossWeights { lambda1: 1.0, lambda2: 0.0 };
        let expected = 1.0 + (1.0 - 6.5025 / 65031.5025) / 2.0;
        assert!((restoration_loss(&black, &white, &w, &cfg, None).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn feature_term_is_weighted() {
        let cfg = SsimConfig::default();
        let a = random_image(16, 16, 7);
        let b = random_image(16, 16, 8);
        let fd = |x: &ImageBuffer, y: &ImageBuffer| mse(x, y).unwrap() * 10.0;
        let base = restoration_loss(&a, &b, &LossWeights { lambda1: 0.5, lambda2: 0.0 }, &cfg, None).unwrap();
        let with = restoration_loss(&a, &b, &LossWeights { lambda1: 0.5, lambda2: 2.0 }, &cfg, Some(&fd)).unwrap();
        assert!((with - base - 20.0 * mse(&a, &b).unwrap()).abs() < 1e-12);
        assert!(restoration_loss(&a, &b, &LossWeights { lambda1: -1.0, lambda2: 0.0 }, &cfg, None).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn ssim_bounded_and_loss_monotone(seed: u64, l1 in 0.0f64..3.0, dl in 0.0f64..3.0) {
            let cfg = SsimConfig::default();
            let a = random_image(14, 13, seed);
            let b = random_image(14, 13, seed ^ 1);
            let s = ssim(&a, &b, &cfg).unwrap();
            proptest::prop_assert!((-1.0..=1.0).contains(&s));
            let lo = restoration_loss(&a, &b, &LossWeights { lambda1: l1, lambda2: 0.0 }, &cfg, None).unwrap();
            let hi = restoration_loss(&a, &b, &LossWeights { lambda1: l1 + dl, lambda2: 0.0 }, &cfg, None).unwrap();
            proptest::prop_assert!(hi >= lo);
            proptest::prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        }
    }
}
