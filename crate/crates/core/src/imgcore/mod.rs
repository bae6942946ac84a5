//! Shared substrate: RGB buffers, rectangular regions, seeded randomness and PNG/JPEG IO.

mod buffer;
mod io;
mod rng;

pub use buffer::{extract_random_patch, ImageBuffer, Region, CHANNELS};
pub use io::{encode_png, list_images, load_image, save_png};
pub use rng::RngStream;
