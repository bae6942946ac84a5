use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, ImageReader};

use super::ImageBuffer;
use crate::{Error, Result};

/// Reads a PNG or JPEG file. Grayscale and 16-bit sources are converted to 8-bit RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::NotFound(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let format = image::guess_format(&bytes).map_err(|e| decode_err(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(decode_err(format!("unsupported format {format:?}")));
    }
    let decoded = ImageReader::with_format(Cursor::new(&bytes), format)
        .decode()
        .map_err(|e| decode_err(e.to_string()))?;
    let rgb = decoded.into_rgb8();
    let (w, h) = rgb.dimensions();
    ImageBuffer::new(w, h, rgb.into_raw())
}

/// PNG-encodes the buffer into memory.
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::write_buffer_with_format(
        &mut Cursor::new(&mut out),
        img.data(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|e| Error::Encode {
        path: PathBuf::from("<memory>"),
        reason: e.to_string(),
    })?;
    Ok(out)
}

pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img).map_err(|e| match e {
        Error::Encode { reason, .. } => Error::Encode {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// PNG/JPEG files directly inside `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(dir.to_path_buf()),
        _ => Error::io(dir, e),
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or(false);
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}
