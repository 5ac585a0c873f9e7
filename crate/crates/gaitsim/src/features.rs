//! Per-cycle gait features: normalized silhouettes, GEI, GEnI,
//! flip/crop augmentation, and flattening to 1500-dim vectors.

use crate::raster::BinarySilhouette;
use thiserror::Error;

pub const FEATURE_HEIGHT: usize = 50;
pub const FEATURE_WIDTH: usize = 30;
pub const FEATURE_DIM: usize = FEATURE_HEIGHT * FEATURE_WIDTH;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("silhouette has no foreground pixels")]
    EmptyForeground,
    #[error("cycle contains no silhouettes")]
    EmptyCycle,
    #[error("silhouette is {0}x{1}, expected {FEATURE_HEIGHT}x{FEATURE_WIDTH}")]
    BadDimensions(usize, usize),
    #[error("crop margins leave a {0}x{1} interior; minimum is 40x24")]
    CropTooLarge(usize, usize),
    #[error("vector has length {0}, expected {FEATURE_DIM}")]
    BadLength(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Gei,
    Geni,
}

impl FeatureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Gei => "gei",
            FeatureKind::Geni => "geni",
        }
    }
}

/// 50×30 real-valued feature image, values in [0,1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
}

impl FeatureImage {
    pub fn new(values: Vec<f64>, kind: FeatureKind) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_DIM {
            return Err(FeatureError::BadLength(values.len()));
        }
        Ok(Self { values, kind })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * FEATURE_WIDTH + col]
    }

    pub fn flipped(&self) -> FeatureImage {
        let mut values = vec![0.0; FEATURE_DIM];
        for row in 0..FEATURE_HEIGHT {
            for col in 0..FEATURE_WIDTH {
                values[row * FEATURE_WIDTH + col] = self.get(row, FEATURE_WIDTH - 1 - col);
            }
        }
        FeatureImage { values, kind: self.kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    RealProxy,
    Synthetic,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::RealProxy => "real-proxy",
            Provenance::Synthetic => "synthetic",
        }
    }
}

/// Row-major flattening of a FeatureImage with its identity metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: String,
    pub provenance: Provenance,
}

/// Per-side crop margins in pixels, applied before rescaling back to 50×30.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropMargins {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Crop to the foreground box, scale the box to height 50 (nearest
/// neighbor, aspect preserved), and center the result horizontally on
/// its centroid column in a 50×30 canvas. Columns that cannot fit are
/// cropped symmetrically. Idempotent on its own outputs.
pub fn normalize_silhouette(mask: &BinarySilhouette) -> Result<BinarySilhouette, FeatureError> {
    let (r0, c0, r1, c1) = mask.bounding_box().ok_or(FeatureError::EmptyForeground)?;
    let (bh, bw) = (r1 - r0 + 1, c1 - c0 + 1);
    let scale = FEATURE_HEIGHT as f64 / bh as f64;
    let sw = ((bw as f64 * scale).round() as usize).max(1);

    // nearest-neighbor resample of the cropped box to 50×sw
    let mut scaled = BinarySilhouette::blank(sw, FEATURE_HEIGHT);
    for row in 0..FEATURE_HEIGHT {
        let sr = (((row as f64 + 0.5) * bh as f64 / FEATURE_HEIGHT as f64) as usize).min(bh - 1);
        for col in 0..sw {
            let sc = (((col as f64 + 0.5) * bw as f64 / sw as f64) as usize).min(bw - 1);
            scaled.set(row, col, mask.get(r0 + sr, c0 + sc));
        }
    }

    // wider than the canvas: drop the excess symmetrically, then
    // re-tighten to the surviving content so placement sees its true box
    let (_, mut b0, _, mut b1) =
        scaled.bounding_box().ok_or(FeatureError::EmptyForeground)?;
    if b1 - b0 + 1 > FEATURE_WIDTH {
        b0 += (b1 - b0 + 1 - FEATURE_WIDTH) / 2;
        b1 = b0 + FEATURE_WIDTH - 1;
        let occupied =
            |col: usize| (0..FEATURE_HEIGHT).any(|row| scaled.get(row, col));
        while b0 < b1 && !occupied(b0) {
            b0 += 1;
        }
        while b1 > b0 && !occupied(b1) {
            b1 -= 1;
        }
    }
    let width = b1 - b0 + 1;

    // translation-invariant placement: centroid column at the canvas center
    let mut n = 0usize;
    let mut col_sum = 0f64;
    for row in 0..FEATURE_HEIGHT {
        for col in b0..=b1 {
            if scaled.get(row, col) {
                n += 1;
                col_sum += (col - b0) as f64;
            }
        }
    }
    let centroid = col_sum / n as f64;
    let center = (FEATURE_WIDTH as f64 - 1.0) / 2.0;
    let start = round_half_up(center - centroid).clamp(0, (FEATURE_WIDTH - width) as i64) as usize;

    let mut out = BinarySilhouette::blank(FEATURE_WIDTH, FEATURE_HEIGHT);
    for row in 0..FEATURE_HEIGHT {
        for col in b0..=b1 {
            if scaled.get(row, col) {
                out.set(row, start + col - b0, true);
            }
        }
    }
    Ok(out)
}

fn check_cycle(cycle: &[BinarySilhouette]) -> Result<(), FeatureError> {
    if cycle.is_empty() {
        return Err(FeatureError::EmptyCycle);
    }
    for m in cycle {
        if m.height != FEATURE_HEIGHT || m.width != FEATURE_WIDTH {
            return Err(FeatureError::BadDimensions(m.height, m.width));
        }
    }
    Ok(())
}

/// Gait Energy Image: per-pixel mean of the cycle's binary silhouettes.
pub fn gei(cycle: &[BinarySilhouette]) -> Result<FeatureImage, FeatureError> {
    check_cycle(cycle)?;
    let n = cycle.len() as f64;
    let values = (0..FEATURE_DIM)
        .map(|i| cycle.iter().filter(|m| m.mask[i]).count() as f64 / n)
        .collect();
    Ok(FeatureImage { values, kind: FeatureKind::Gei })
}

fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Gait Entropy Image: per-pixel binary Shannon entropy of the
/// foreground frequency.
pub fn geni(cycle: &[BinarySilhouette]) -> Result<FeatureImage, FeatureError> {
    check_cycle(cycle)?;
    let n = cycle.len() as f64;
    let values = (0..FEATURE_DIM)
        .map(|i| binary_entropy(cycle.iter().filter(|m| m.mask[i]).count() as f64 / n))
        .collect();
    Ok(FeatureImage { values, kind: FeatureKind::Geni })
}

/// Bilinear crop-and-rescale back to the 50×30 canvas.
fn crop_rescale(feature: &FeatureImage, m: &CropMargins) -> Result<FeatureImage, FeatureError> {
    let h = FEATURE_HEIGHT.saturating_sub(m.top + m.bottom);
    let w = FEATURE_WIDTH.saturating_sub(m.left + m.right);
    if h < 40 || w < 24 {
        return Err(FeatureError::CropTooLarge(h, w));
    }
    let sample = |row: usize, col: usize| feature.get(m.top + row, m.left + col);
    let mut values = vec![0.0; FEATURE_DIM];
    for row in 0..FEATURE_HEIGHT {
        let sy = ((row as f64 + 0.5) * h as f64 / FEATURE_HEIGHT as f64 - 0.5).max(0.0);
        let y0 = (sy as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for col in 0..FEATURE_WIDTH {
            let sx = ((col as f64 + 0.5) * w as f64 / FEATURE_WIDTH as f64 - 0.5).max(0.0);
            let x0 = (sx as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = sample(y0, x0) * (1.0 - fx) + sample(y0, x1) * fx;
            let bot = sample(y1, x0) * (1.0 - fx) + sample(y1, x1) * fx;
            values[row * FEATURE_WIDTH + col] = top * (1.0 - fy) + bot * fy;
        }
    }
    Ok(FeatureImage { values, kind: feature.kind })
}

/// {original, horizontal flip} × {identity, each crop}, in that order.
pub fn augment(
    feature: &FeatureImage,
    crops: &[CropMargins],
) -> Result<Vec<FeatureImage>, FeatureError> {
    let mut out = Vec::with_capacity(2 * (1 + crops.len()));
    for base in [feature.clone(), feature.flipped()] {
        out.push(base.clone());
        for m in crops {
            out.push(crop_rescale(&base, m)?);
        }
    }
    Ok(out)
}

/// Row-major flattening into a labeled 1500-vector.
pub fn flatten(feature: &FeatureImage, label: &str, provenance: Provenance) -> FeatureVector {
    FeatureVector { values: feature.values.clone(), label: label.to_string(), provenance }
}

pub fn unflatten(vector: &FeatureVector, kind: FeatureKind) -> Result<FeatureImage, FeatureError> {
    FeatureImage::new(vector.values.clone(), kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank() -> BinarySilhouette {
        BinarySilhouette::blank(FEATURE_WIDTH, FEATURE_HEIGHT)
    }

    fn block(width: usize, height: usize, r0: usize, c0: usize, h: usize, w: usize) -> BinarySilhouette {
        let mut m = BinarySilhouette::blank(width, height);
        for row in r0..r0 + h {
            for col in c0..c0 + w {
                m.set(row, col, true);
            }
        }
        m
    }

    #[test]
    fn already_normal_preserves_count() {
        let m = block(FEATURE_WIDTH, FEATURE_HEIGHT, 0, 5, 50, 20);
        let out = normalize_silhouette(&m).unwrap();
        assert_eq!(out.foreground_count(), m.foreground_count());
        let (r0, _, r1, _) = out.bounding_box().unwrap();
        assert_eq!((r0, r1), (0, 49));
    }

    #[test]
    fn tall_blob_scaled_to_height_50() {
        let m = block(120, 120, 10, 40, 100, 30);
        let out = normalize_silhouette(&m).unwrap();
        let (r0, c0, r1, c1) = out.bounding_box().unwrap();
        assert_eq!(r1 - r0 + 1, 50);
        // aspect preserved: 30 wide at scale 0.5 -> 15
        assert_eq!(c1 - c0 + 1, 15);
    }

    #[test]
    fn wide_blob_cropped_symmetrically() {
        let m = block(120, 60, 5, 20, 50, 80);
        let out = normalize_silhouette(&m).unwrap();
        let (_, c0, _, c1) = out.bounding_box().unwrap();
        assert_eq!((c0, c1), (0, FEATURE_WIDTH - 1));
        // 80 wide: 25 columns dropped per side, 50 rows kept
        assert_eq!(out.foreground_count(), 50 * 30);
    }

    #[test]
    fn normalize_is_idempotent() {
        let shapes = [
            block(120, 120, 10, 40, 100, 30),
            block(120, 60, 5, 20, 50, 80),
            block(64, 64, 3, 1, 40, 9),
            {
                // asymmetric: heavy head, narrow leg off to one side
                let mut m = block(64, 64, 0, 10, 20, 30);
                for row in 20..60 {
                    for col in 12..15 {
                        m.set(row, col, true);
                    }
                }
                m
            },
        ];
        for m in &shapes {
            let once = normalize_silhouette(m).unwrap();
            let twice = normalize_silhouette(&once).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn normalize_rejects_empty() {
        assert_eq!(
            normalize_silhouette(&blank()).unwrap_err(),
            FeatureError::EmptyForeground
        );
    }

    #[test]
    fn gei_of_identical_frames_is_the_frame() {
        let m = block(FEATURE_WIDTH, FEATURE_HEIGHT, 10, 10, 20, 10);
        let g = gei(&[m.clone(), m.clone(), m.clone()]).unwrap();
        for (v, on) in g.values.iter().zip(&m.mask) {
            assert_eq!(*v, if *on { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn gei_two_frame_half() {
        let a = block(FEATURE_WIDTH, FEATURE_HEIGHT, 0, 0, 1, 1);
        let g = gei(&[a, blank()]).unwrap();
        assert_eq!(g.values[0], 0.5);
        assert_eq!(g.values[1], 0.0);
    }

    #[test]
    fn gei_two_thirds() {
        let a = block(FEATURE_WIDTH, FEATURE_HEIGHT, 0, 0, 1, 1);
        let g = gei(&[blank(), a.clone(), a]).unwrap();
        assert!((g.values[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gei_partition_linearity() {
        let frames: Vec<_> = (0..7)
            .map(|i| block(FEATURE_WIDTH, FEATURE_HEIGHT, i, i, 10, 5))
            .collect();
        let whole = gei(&frames).unwrap();
        let left = gei(&frames[..3]).unwrap();
        let right = gei(&frames[3..]).unwrap();
        for i in 0..FEATURE_DIM {
            let mixed = (3.0 * left.values[i] + 4.0 * right.values[i]) / 7.0;
            assert!((whole.values[i] - mixed).abs() < 1e-12);
        }
    }

    #[test]
    fn geni_extremes_and_quarter() {
        let on = block(FEATURE_WIDTH, FEATURE_HEIGHT, 0, 0, 1, 1);
        // p = 1
        let e = geni(&[on.clone(), on.clone()]).unwrap();
        assert_eq!(e.values[0], 0.0);
        // p = 0.5
        let e = geni(&[on.clone(), blank()]).unwrap();
        assert_eq!(e.values[0], 1.0);
        // p = 0.25
        let e = geni(&[on, blank(), blank(), blank()]).unwrap();
        assert!((e.values[0] - 0.8113).abs() < 1e-4);
        // p = 0 stays exactly 0
        assert_eq!(e.values[1], 0.0);
    }

    #[test]
    fn empty_cycle_rejected() {
        assert_eq!(gei(&[]).unwrap_err(), FeatureError::EmptyCycle);
        assert_eq!(geni(&[]).unwrap_err(), FeatureError::EmptyCycle);
    }

    #[test]
    fn wrong_frame_size_rejected() {
        let m = BinarySilhouette::blank(10, 10);
        assert_eq!(gei(&[m]).unwrap_err(), FeatureError::BadDimensions(10, 10));
    }

    #[test]
    fn flip_involution() {
        let frames: Vec<_> = (0..4)
            .map(|i| block(FEATURE_WIDTH, FEATURE_HEIGHT, 2 * i, 3 * i, 12, 4))
            .collect();
        let g = gei(&frames).unwrap();
        assert_eq!(g.flipped().flipped(), g);
    }

    #[test]
    fn flip_commutes_with_gei() {
        let frames: Vec<_> = (0..5)
            .map(|i| block(FEATURE_WIDTH, FEATURE_HEIGHT, i, 2 * i, 15, 6))
            .collect();
        let flipped_frames: Vec<_> = frames
            .iter()
            .map(|m| {
                let mut f = blank();
                for row in 0..FEATURE_HEIGHT {
                    for col in 0..FEATURE_WIDTH {
                        f.set(row, FEATURE_WIDTH - 1 - col, m.get(row, col));
                    }
                }
                f
            })
            .collect();
        assert_eq!(gei(&flipped_frames).unwrap(), gei(&frames).unwrap().flipped());
    }

    #[test]
    fn augment_no_crops() {
        let g = gei(&[block(FEATURE_WIDTH, FEATURE_HEIGHT, 5, 5, 30, 10)]).unwrap();
        let out = augment(&g, &[]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], g);
        assert_eq!(out[1], g.flipped());
    }

    #[test]
    fn augment_symmetric_feature_flip_identity() {
        // symmetric block: cols 10..20 about center 14.5
        let g = gei(&[block(FEATURE_WIDTH, FEATURE_HEIGHT, 5, 10, 30, 10)]).unwrap();
        let out = augment(&g, &[]).unwrap();
        for (a, b) in out[0].values.iter().zip(&out[1].values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn augment_constant_invariance() {
        let g = FeatureImage::new(vec![0.37; FEATURE_DIM], FeatureKind::Gei).unwrap();
        let crops = [CropMargins { top: 2, bottom: 2, left: 2, right: 2 }];
        let out = augment(&g, &crops).unwrap();
        assert_eq!(out.len(), 4);
        for img in &out {
            for v in &img.values {
                assert!((v - 0.37).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn augment_count_and_crop_limit() {
        let g = FeatureImage::new(vec![0.0; FEATURE_DIM], FeatureKind::Gei).unwrap();
        let crops = [
            CropMargins { top: 2, bottom: 2, left: 2, right: 2 },
            CropMargins { top: 4, bottom: 4, left: 2, right: 2 },
        ];
        assert_eq!(augment(&g, &crops).unwrap().len(), 6);
        let huge = [CropMargins { top: 6, bottom: 6, left: 0, right: 0 }];
        assert_eq!(augment(&g, &huge).unwrap_err(), FeatureError::CropTooLarge(38, 30));
    }

    #[test]
    fn flatten_indexing_and_round_trip() {
        let mut values = vec![0.0; FEATURE_DIM];
        values[1] = 1.0; // (row 0, col 1)
        let g = FeatureImage::new(values, FeatureKind::Gei).unwrap();
        let v = flatten(&g, "s01", Provenance::Synthetic);
        assert_eq!(v.values.len(), FEATURE_DIM);
        assert_eq!(v.values[1], 1.0);
        assert_eq!(v.values[0], 0.0);
        assert_eq!(unflatten(&v, FeatureKind::Gei).unwrap(), g);

        let zeros = flatten(
            &FeatureImage::new(vec![0.0; FEATURE_DIM], FeatureKind::Geni).unwrap(),
            "s02",
            Provenance::RealProxy,
        );
        assert!(zeros.values.iter().all(|&x| x == 0.0));
        assert_eq!(zeros.provenance.as_str(), "real-proxy");
    }

    #[test]
    fn unflatten_rejects_bad_length() {
        let v = FeatureVector {
            values: vec![0.0; 10],
            label: "x".into(),
            provenance: Provenance::Synthetic,
        };
        assert_eq!(unflatten(&v, FeatureKind::Gei).unwrap_err(), FeatureError::BadLength(10));
    }

    #[test]
    fn normalized_walker_features_in_range() {
        use crate::synth::{generate_silhouettes, ConfounderConfig, RenderSettings, WalkerIdentity};
        let masks = generate_silhouettes(
            &WalkerIdentity::default(),
            &ConfounderConfig::default(),
            &RenderSettings::default(),
            1.2,
            25.0,
        )
        .unwrap();
        let normalized: Vec<_> = masks.iter().map(|m| normalize_silhouette(m).unwrap()).collect();
        let g = gei(&normalized).unwrap();
        let e = geni(&normalized).unwrap();
        assert!(g.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(e.values.iter().all(|v| (0.0..=1.0).contains(v)));
        // never-foreground pixels are exactly zero in both
        for i in 0..FEATURE_DIM {
            if g.values[i] == 0.0 {
                assert_eq!(e.values[i], 0.0);
            }
        }
        // the walker occupies a solid core: some pixel is always on
        assert!(g.values.iter().any(|&v| v == 1.0));
    }
}
