//! Data tooling for object detection under low light.
//!
//! The crate is organised around a plain 8-bit RGB raster ([`ImageBuffer`]) and a
//! counter-based random stream ([`RngStream`]) so every randomized operation is a
//! pure function of its inputs and seed:
//!
//! - [`corrupt`]: posterization + shot noise restoration pairs for enhancement pre-training.
//! - [`augment`]: patch-wise light augmentation, object block shuffle and histogram equalization.
//! - [`metrics`]: MSE, SSIM and the composite restoration loss.
//! - [`annotations`]: COCO-style ground truth with per-instance lighting flags, and detector results.
//! - [`eval`]: greedy IoU matching, 101-point PR curves, AP and the error-elimination curves.

pub mod annotations;
pub mod augment;
pub mod corrupt;
mod error;
pub mod eval;
pub mod imgcore;
pub mod metrics;

pub use error::{Error, Result};
pub use imgcore::{ImageBuffer, Region, RngStream};
