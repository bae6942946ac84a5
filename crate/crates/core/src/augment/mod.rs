//! Photometric and structural augmentations for low-light training data.

mod equalize;
mod light;
mod shuffle;

pub use equalize::{equalize_channel_table, histogram_equalize};
pub use light::{apply_light_tile, light_tiles, patch_light_augment, LightAugConfig};
pub use shuffle::{block_shuffle, shuffle_region, ShuffleConfig};
