//! Silhouette extraction.
//!
//! Realistic frames go through LAB background subtraction followed by
//! two-class intensity clustering; synthetic frames with a uniform
//! background use a chroma key. `largest_component` cleans up stray
//! specks left by noisy segmentation.

use crate::raster::{BinarySilhouette, GrayImage, RgbImage};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image intensities are constant; no two-class structure")]
    DegenerateImage,
    #[error("mask has no foreground pixels")]
    EmptyForeground,
}

/// 3-channel real image in CIE L*a*b* (L in [0,100], a and b signed).
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

const EPS: f64 = 216.0 / 24389.0; // (6/29)^3
const KAPPA: f64 = 24389.0 / 27.0;
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83]; // D65

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> u8 {
    let c = c.clamp(0.0, 1.0);
    let v = if c <= 0.0031308 { c * 12.92 } else { 1.055 * c.powf(1.0 / 2.4) - 0.055 };
    (v * 255.0).round() as u8
}

/// sRGB (D65) to L*a*b* for one pixel.
pub fn srgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let xyz = [
        0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b,
        0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b,
        0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b,
    ];
    let f = |t: f64| if t > EPS { t.cbrt() } else { (KAPPA * t + 16.0) / 116.0 };
    let fx = f(xyz[0] / WHITE[0]);
    let fy = f(xyz[1] / WHITE[1]);
    let fz = f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`srgb_pixel_to_lab`]; round-trip error on the sRGB gamut is
/// below half a code value per channel.
pub fn lab_pixel_to_srgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let finv = |t: f64| {
        let t3 = t * t * t;
        if t3 > EPS {
            t3
        } else {
            (116.0 * t - 16.0) / KAPPA
        }
    };
    let x = finv(fx) * WHITE[0];
    let y = finv(fy) * WHITE[1];
    let z = finv(fz) * WHITE[2];
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)]
}

pub fn rgb_to_lab(image: &RgbImage) -> LabImage {
    LabImage {
        width: image.width,
        height: image.height,
        pixels: image.pixels.iter().map(|&p| srgb_pixel_to_lab(p)).collect(),
    }
}

/// Per-pixel Euclidean LAB distance between frame and background.
pub fn background_subtract(frame: &RgbImage, background: &RgbImage) -> Result<GrayImage, SegmentError> {
    if frame.width != background.width || frame.height != background.height {
        return Err(SegmentError::DimensionMismatch(
            frame.width,
            frame.height,
            background.width,
            background.height,
        ));
    }
    let values = frame
        .pixels
        .iter()
        .zip(&background.pixels)
        .map(|(&f, &b)| {
            let lf = srgb_pixel_to_lab(f);
            let lb = srgb_pixel_to_lab(b);
            ((lf[0] - lb[0]).powi(2) + (lf[1] - lb[1]).powi(2) + (lf[2] - lb[2]).powi(2)).sqrt()
        })
        .collect();
    Ok(GrayImage { width: frame.width, height: frame.height, values })
}

/// Two-class split of a difference image by 1-D 2-means.
///
/// Centroids start at the min and max intensity; Lloyd iterations run to a
/// change-free assignment (or 100 rounds). The threshold is the midpoint
/// of the final centroids and the higher cluster is foreground.
pub fn cluster_threshold(gray: &GrayImage) -> Result<BinarySilhouette, SegmentError> {
    let (threshold, _) = two_means_threshold(gray)?;
    let mask = gray.values.iter().map(|&v| v > threshold).collect();
    Ok(BinarySilhouette { width: gray.width, height: gray.height, mask })
}

/// The 2-means threshold and final centroids, exposed for inspection.
pub fn two_means_threshold(gray: &GrayImage) -> Result<(f64, [f64; 2]), SegmentError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &gray.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(SegmentError::DegenerateImage);
    }
    let mut c = [lo, hi];
    let mut boundary = (c[0] + c[1]) / 2.0;
    for _ in 0..100 {
        let (mut sum0, mut n0, mut sum1, mut n1) = (0.0f64, 0usize, 0.0f64, 0usize);
        for &v in &gray.values {
            if v > boundary {
                sum1 += v;
                n1 += 1;
            } else {
                sum0 += v;
                n0 += 1;
            }
        }
        let next = [
            if n0 > 0 { sum0 / n0 as f64 } else { c[0] },
            if n1 > 0 { sum1 / n1 as f64 } else { c[1] },
        ];
        let next_boundary = (next[0] + next[1]) / 2.0;
        let converged = next_boundary == boundary;
        c = next;
        boundary = next_boundary;
        if converged {
            break;
        }
    }
    Ok((boundary, c))
}

/// Foreground iff the max per-channel absolute difference from the
/// background color exceeds the tolerance.
pub fn chroma_key(frame: &RgbImage, background_color: [u8; 3], tolerance: u8) -> BinarySilhouette {
    let mask = frame
        .pixels
        .iter()
        .map(|p| {
            p.iter()
                .zip(&background_color)
                .map(|(&a, &b)| a.abs_diff(b))
                .max()
                .unwrap()
                > tolerance
        })
        .collect();
    BinarySilhouette { width: frame.width, height: frame.height, mask }
}

/// Keep only the largest 8-connected foreground component; ties break on
/// the smallest top-left bounding-box corner in row-major order.
pub fn largest_component(mask: &BinarySilhouette) -> Result<BinarySilhouette, SegmentError> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut labels = vec![u32::MAX; mask.mask.len()];
    let mut best: Option<(usize, (usize, usize), u32)> = None; // (size, corner, label)
    let mut next_label = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.mask.len() {
        if !mask.mask[start] || labels[start] != u32::MAX {
            continue;
        }
        let label = next_label;
        next_label += 1;
        let mut size = 0usize;
        let mut corner = (usize::MAX, usize::MAX);
        stack.push(start);
        labels[start] = label;
        while let Some(idx) = stack.pop() {
            size += 1;
            let (r, c) = (idx / mask.width, idx % mask.width);
            corner = (corner.0.min(r), corner.1.min(c));
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h || nc >= w {
                        continue;
                    }
                    let nidx = (nr * w + nc) as usize;
                    if mask.mask[nidx] && labels[nidx] == u32::MAX {
                        labels[nidx] = label;
                        stack.push(nidx);
                    }
                }
            }
        }
        let candidate = (size, corner, label);
        best = Some(match best {
            None => candidate,
            Some(b) => {
                if size > b.0 || (size == b.0 && corner < b.1) {
                    candidate
                } else {
                    b
                }
            }
        });
    }
    let (_, _, keep) = best.ok_or(SegmentError::EmptyForeground)?;
    let out = labels.iter().map(|&l| l == keep).collect();
    Ok(BinarySilhouette { width: mask.width, height: mask.height, mask: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn white_point() {
        let lab = srgb_pixel_to_lab([255, 255, 255]);
        assert!((lab[0] - 100.0).abs() < 0.1, "L = {}", lab[0]);
        assert!(lab[1].abs() < 0.1 && lab[2].abs() < 0.1);
    }

    #[test]
    fn black_point() {
        let lab = srgb_pixel_to_lab([0, 0, 0]);
        assert!(lab[0].abs() < 1e-9 && lab[1].abs() < 1e-9 && lab[2].abs() < 1e-9);
    }

    #[test]
    fn mid_gray() {
        // 119/255 gray: L ~ 50.0 from the sRGB/D65 formulas evaluated
        // independently
        let lab = srgb_pixel_to_lab([119, 119, 119]);
        assert!((lab[0] - 50.0).abs() < 0.2, "L = {}", lab[0]);
        assert!(lab[1].abs() < 0.05 && lab[2].abs() < 0.05);
    }

    #[test]
    fn lab_round_trip_on_gamut() {
        for r in (0..=255).step_by(15) {
            for g in (0..=255).step_by(15) {
                for b in (0..=255).step_by(15) {
                    let p = [r as u8, g as u8, b as u8];
                    let back = lab_pixel_to_srgb(srgb_pixel_to_lab(p));
                    assert_eq!(p, back, "round trip must stay within half a code value");
                }
            }
        }
    }

    #[test]
    fn subtract_identical_is_zero() {
        let f = RgbImage::filled(4, 3, [10, 200, 30]);
        let d = background_subtract(&f, &f).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subtract_single_luminance_axis() {
        // two grays whose LAB difference lies on the L axis only
        let bg = RgbImage::filled(2, 1, [119, 119, 119]);
        let mut f = bg.clone();
        f.pixels[1] = [194, 194, 194]; // L ~ 78.6
        let d = background_subtract(&f, &bg).unwrap();
        assert_eq!(d.values[0], 0.0);
        let dl = srgb_pixel_to_lab([194, 194, 194])[0] - srgb_pixel_to_lab([119, 119, 119])[0];
        assert!((d.values[1] - dl).abs() < 1e-9);
    }

    #[test]
    fn subtract_dimension_mismatch() {
        let f = RgbImage::filled(10, 10, [0, 0, 0]);
        let b = RgbImage::filled(10, 11, [0, 0, 0]);
        assert!(matches!(
            background_subtract(&f, &b),
            Err(SegmentError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn two_means_bimodal() {
        let g = GrayImage::new(4, 1, vec![10.0, 200.0, 10.0, 200.0]).unwrap();
        let (threshold, c) = two_means_threshold(&g).unwrap();
        assert_eq!(threshold, 105.0);
        assert_eq!(c, [10.0, 200.0]);
        let m = cluster_threshold(&g).unwrap();
        assert_eq!(m.mask, vec![false, true, false, true]);
    }

    #[test]
    fn two_means_three_level() {
        // Lloyd from min/max init: first boundary 127.5 puts 100 in the low
        // cluster, centroids move to {40, 255} and stay; threshold 147.5
        let g = GrayImage::new(6, 1, vec![0.0, 0.0, 0.0, 100.0, 100.0, 255.0]).unwrap();
        let (threshold, c) = two_means_threshold(&g).unwrap();
        assert_eq!(c, [40.0, 255.0]);
        assert_eq!(threshold, 147.5);
        let m = cluster_threshold(&g).unwrap();
        assert_eq!(m.foreground_count(), 1);
    }

    #[test]
    fn degenerate_constant_image() {
        let g = GrayImage::new(3, 3, vec![7.0; 9]).unwrap();
        assert_eq!(cluster_threshold(&g).unwrap_err(), SegmentError::DegenerateImage);
    }

    #[test]
    fn subtract_then_cluster_never_fabricates_foreground() {
        let f = RgbImage::filled(5, 5, [90, 10, 200]);
        let d = background_subtract(&f, &f).unwrap();
        assert_eq!(cluster_threshold(&d).unwrap_err(), SegmentError::DegenerateImage);
    }

    #[test]
    fn chroma_key_basics() {
        let bg = [0, 200, 0];
        let f = RgbImage::filled(3, 1, bg);
        assert_eq!(chroma_key(&f, bg, 0).foreground_count(), 0);
        let mut f2 = f.clone();
        f2.pixels[1] = [0, 201, 0];
        let m = chroma_key(&f2, bg, 0);
        assert_eq!(m.mask, vec![false, true, false]);
    }

    #[test]
    fn largest_component_keeps_big_blob() {
        let mut m = BinarySilhouette::blank(20, 20);
        // 50-pixel blob
        for r in 2..12 {
            for c in 2..7 {
                m.set(r, c, true);
            }
        }
        // 3-pixel speck
        m.set(17, 17, true);
        m.set(17, 18, true);
        m.set(18, 17, true);
        let cleaned = largest_component(&m).unwrap();
        assert_eq!(cleaned.foreground_count(), 50);
        assert!(!cleaned.get(17, 17));
    }

    #[test]
    fn largest_component_single_blob_unchanged() {
        let mut m = BinarySilhouette::blank(8, 8);
        for r in 1..4 {
            for c in 1..4 {
                m.set(r, c, true);
            }
        }
        assert_eq!(largest_component(&m).unwrap(), m);
    }

    #[test]
    fn largest_component_tie_break() {
        let mut m = BinarySilhouette::blank(10, 10);
        m.set(5, 5, true); // later in row-major order
        m.set(1, 1, true); // earlier corner wins the tie
        let cleaned = largest_component(&m).unwrap();
        assert!(cleaned.get(1, 1));
        assert!(!cleaned.get(5, 5));
    }

    #[test]
    fn largest_component_empty() {
        let m = BinarySilhouette::blank(4, 4);
        assert_eq!(largest_component(&m).unwrap_err(), SegmentError::EmptyForeground);
    }

    proptest! {
        #[test]
        fn cluster_invariant_under_positive_affine(scale in 0.1f64..10.0, offset in -50.0f64..50.0) {
            let vals = vec![3.0, 5.0, 50.0, 60.0, 2.0, 55.0, 4.0, 58.0];
            let g = GrayImage::new(vals.len(), 1, vals.clone()).unwrap();
            let rescaled = GrayImage::new(vals.len(), 1, vals.iter().map(|v| v * scale + offset).collect()).unwrap();
            prop_assert_eq!(cluster_threshold(&g).unwrap().mask, cluster_threshold(&rescaled).unwrap().mask);
        }

        #[test]
        fn chroma_tolerance_monotone(t1 in 0u8..255, t2 in 0u8..255) {
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let mut f = RgbImage::filled(16, 1, [100, 100, 100]);
            for (i, p) in f.pixels.iter_mut().enumerate() {
                p[0] = (i * 16) as u8;
            }
            let m_lo = chroma_key(&f, [100, 100, 100], lo);
            let m_hi = chroma_key(&f, [100, 100, 100], hi);
            for (a, b) in m_hi.mask.iter().zip(&m_lo.mask) {
                prop_assert!(!a | b, "foreground must shrink as tolerance grows");
            }
        }
    }
}
