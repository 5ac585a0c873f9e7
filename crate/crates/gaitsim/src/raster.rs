//! In-memory image types shared across the pipeline, plus PNM encoding.

use thiserror::Error;

/// 8-bit RGB frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, one `[r, g, b]` triple per pixel.
    pub pixels: Vec<[u8; 3]>,
}

/// Real-valued single-channel image (e.g. a LAB difference image).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Per-frame foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySilhouette {
    pub width: usize,
    pub height: usize,
    /// Row-major, true = foreground.
    pub mask: Vec<bool>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("image dimensions must be positive")]
    EmptyDimensions,
    #[error("pixel data length {got} does not match {width}x{height}")]
    DataLengthMismatch { width: usize, height: usize, got: usize },
    #[error("malformed PNM data: {0}")]
    MalformedPnm(String),
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, RasterError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, color: [u8; 3]) {
        self.pixels[row * self.width + col] = color;
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        check_dims(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

impl BinarySilhouette {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height, mask.len())?;
        Ok(Self { width, height, mask })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self { width, height, mask: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.mask[row * self.width + col] = on;
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Inclusive (min_row, min_col, max_row, max_col) of the foreground,
    /// or None when the mask is empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    bb = Some(match bb {
                        None => (row, col, row, col),
                        Some((r0, c0, r1, c1)) => {
                            (r0.min(row), c0.min(col), r1.max(row), c1.max(col))
                        }
                    });
                }
            }
        }
        bb
    }

    /// Foreground centroid as (row, col); None when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sr, mut sc) = (0f64, 0f64);
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    n += 1;
                    sr += row as f64;
                    sc += col as f64;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some((sr / n as f64, sc / n as f64))
        }
    }

    /// Content moved by (dx cols, dy rows); pixels leaving the frame are dropped.
    pub fn translated(&self, dx: i64, dy: i64) -> BinarySilhouette {
        let mut out = BinarySilhouette::blank(self.width, self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    let nr = row as i64 + dy;
                    let nc = col as i64 + dx;
                    if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
                        out.set(nr as usize, nc as usize, true);
                    }
                }
            }
        }
        out
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions);
    }
    if len != width * height {
        return Err(RasterError::DataLengthMismatch { width, height, got: len });
    }
    Ok(())
}

/// Encode a mask as binary PBM (P4).
pub fn encode_pbm(mask: &BinarySilhouette) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let row_bytes = mask.width.div_ceil(8);
    for row in 0..mask.height {
        let mut bytes = vec![0u8; row_bytes];
        for col in 0..mask.width {
            if mask.get(row, col) {
                bytes[col / 8] |= 0x80 >> (col % 8);
            }
        }
        out.extend_from_slice(&bytes);
    }
    out
}

/// Decode a binary PBM (P4) mask.
pub fn decode_pbm(data: &[u8]) -> Result<BinarySilhouette, RasterError> {
    let (magic, rest) = next_token(data)?;
    if magic != "P4" {
        return Err(RasterError::MalformedPnm(format!("expected P4, got {magic}")));
    }
    let (w, rest) = next_token(rest)?;
    let (h, rest) = next_token(rest)?;
    let width: usize = w.parse().map_err(|_| RasterError::MalformedPnm("bad width".into()))?;
    let height: usize = h.parse().map_err(|_| RasterError::MalformedPnm("bad height".into()))?;
    // exactly one whitespace byte separates the header from raster data
    let rest = rest
        .get(1..)
        .ok_or_else(|| RasterError::MalformedPnm("truncated raster".into()))?;
    let row_bytes = width.div_ceil(8);
    if rest.len() < row_bytes * height {
        return Err(RasterError::MalformedPnm("truncated raster".into()));
    }
    let mut mask = vec![false; width * height];
    for row in 0..height {
        for col in 0..width {
            let byte = rest[row * row_bytes + col / 8];
            mask[row * width + col] = byte & (0x80 >> (col % 8)) != 0;
        }
    }
    BinarySilhouette::new(width, height, mask)
}

/// Encode a real-valued image in [0,1] as 8-bit PGM (P5), value*255 rounded half-up.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    for &v in &img.values {
        out.push((v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8);
    }
    out
}

/// Encode an RGB image as binary PPM (P6).
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Decode a binary PPM (P6) image.
pub fn decode_ppm(data: &[u8]) -> Result<RgbImage, RasterError> {
    let (magic, rest) = next_token(data)?;
    if magic != "P6" {
        return Err(RasterError::MalformedPnm(format!("expected P6, got {magic}")));
    }
    let (w, rest) = next_token(rest)?;
    let (h, rest) = next_token(rest)?;
    let (maxval, rest) = next_token(rest)?;
    if maxval != "255" {
        return Err(RasterError::MalformedPnm("only maxval 255 supported".into()));
    }
    let width: usize = w.parse().map_err(|_| RasterError::MalformedPnm("bad width".into()))?;
    let height: usize = h.parse().map_err(|_| RasterError::MalformedPnm("bad height".into()))?;
    let rest = rest
        .get(1..)
        .ok_or_else(|| RasterError::MalformedPnm("truncated raster".into()))?;
    if rest.len() < width * height * 3 {
        return Err(RasterError::MalformedPnm("truncated raster".into()));
    }
    let pixels = rest[..width * height * 3]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RgbImage::new(width, height, pixels)
}

fn next_token(data: &[u8]) -> Result<(&str, &[u8]), RasterError> {
    let mut i = 0;
    while i < data.len() && data[i].is_ascii_whitespace() {
        i += 1;
    }
    let start = i;
    while i < data.len() && !data[i].is_ascii_whitespace() {
        i += 1;
    }
    if start == i {
        return Err(RasterError::MalformedPnm("unexpected end of header".into()));
    }
    let tok = std::str::from_utf8(&data[start..i])
        .map_err(|_| RasterError::MalformedPnm("non-utf8 header".into()))?;
    Ok((tok, &data[i..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbm_round_trip() {
        let mut m = BinarySilhouette::blank(13, 5);
        for (i, on) in [(0, true), (7, true), (12, true), (30, true)] {
            m.mask[i] = on;
        }
        let enc = encode_pbm(&m);
        assert_eq!(decode_pbm(&enc).unwrap(), m);
    }

    #[test]
    fn ppm_round_trip() {
        let img = RgbImage::new(3, 2, vec![[1, 2, 3]; 6]).unwrap();
        assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn bounding_box_and_centroid() {
        let mut m = BinarySilhouette::blank(10, 10);
        m.set(2, 3, true);
        m.set(4, 7, true);
        assert_eq!(m.bounding_box(), Some((2, 3, 4, 7)));
        assert_eq!(m.centroid(), Some((3.0, 5.0)));
        assert_eq!(BinarySilhouette::blank(4, 4).bounding_box(), None);
    }

    #[test]
    fn translation_drops_out_of_frame() {
        let mut m = BinarySilhouette::blank(4, 4);
        m.set(0, 0, true);
        m.set(3, 3, true);
        let t = m.translated(1, 1);
        assert!(t.get(1, 1));
        assert_eq!(t.foreground_count(), 1);
    }

    #[test]
    fn dimension_validation() {
        assert_eq!(
            BinarySilhouette::new(0, 5, vec![]).unwrap_err(),
            RasterError::EmptyDimensions
        );
        assert!(matches!(
            GrayImage::new(2, 2, vec![0.0; 3]).unwrap_err(),
            RasterError::DataLengthMismatch { .. }
        ));
    }
}
