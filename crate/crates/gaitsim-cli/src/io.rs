//! File plumbing: atomic writes, PNG codecs bridged to the library's
//! raster types, and small CSV helpers.

use gaitsim::raster::RgbImage;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use std::path::{Path, PathBuf};

use crate::error::{data, CliError};

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| data(format!("cannot create {}: {e}", parent.display())))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| data(format!("invalid output path {}", path.display())))?;
    let mut tmp = PathBuf::from(path);
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| data(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| data(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, CliError> {
    let mut raw = Vec::with_capacity(img.pixels.len() * 3);
    for p in &img.pixels {
        raw.extend_from_slice(p);
    }
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&raw, img.width as u32, img.height as u32, ExtendedColorType::Rgb8)
        .map_err(|e| data(format!("png encode failed: {e}")))?;
    Ok(out)
}

pub fn load_png(path: &Path) -> Result<RgbImage, CliError> {
    let decoded = image::open(path)
        .map_err(|e| data(format!("cannot read image {}: {e}", path.display())))?
        .into_rgb8();
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = decoded.pixels().map(|p| p.0).collect();
    RgbImage::new(width, height, pixels)
        .map_err(|e| data(format!("bad image {}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

/// Parse a CSV produced by this tool: fixed header, comma-separated,
/// no quoting.
pub fn parse_csv(text: &str, path: &Path, header: &str) -> Result<Vec<Vec<String>>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        other => {
            return Err(data(format!(
                "{}: expected header {header:?}, found {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    Ok(lines
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect())
}

/// Shortest round-trip float formatting, shared by every CSV writer so
/// reruns are byte-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
