//! Jaccard-index agreement between binary silhouettes.
//!
//! The index is |A ∩ B| / |A ∪ B| over foreground pixel sets. Both-empty
//! masks score 1 (identical empty sets); empty-vs-non-empty scores 0.
//! Alignment compensates translation only, by moving the second mask so
//! the foreground centroids coincide (integer rounding, half up).

use crate::raster::BinarySilhouette;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("mask has no foreground pixels")]
    EmptyForeground,
    #[error("cycle has no frames")]
    EmptyCycle,
    #[error("no samples provided")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JaccardResult {
    pub value: f64,
    pub intersection: usize,
    pub union: usize,
    /// (dx, dy) translation applied to the second mask.
    pub shift: (i64, i64),
}

pub fn jaccard(a: &BinarySilhouette, b: &BinarySilhouette) -> Result<JaccardResult, SimilarityError> {
    check_dims(a, b)?;
    Ok(jaccard_raw(a, b, (0, 0)))
}

fn jaccard_raw(a: &BinarySilhouette, b: &BinarySilhouette, shift: (i64, i64)) -> JaccardResult {
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (&pa, &pb) in a.mask.iter().zip(&b.mask) {
        if pa && pb {
            intersection += 1;
        }
        if pa || pb {
            union += 1;
        }
    }
    let value = if union == 0 { 1.0 } else { intersection as f64 / union as f64 };
    JaccardResult { value, intersection, union, shift }
}

/// Jaccard after translating `b` so its foreground centroid coincides with
/// `a`'s. Pixels translated outside the frame are dropped.
pub fn jaccard_aligned(
    a: &BinarySilhouette,
    b: &BinarySilhouette,
) -> Result<JaccardResult, SimilarityError> {
    check_dims(a, b)?;
    let ca = a.centroid().ok_or(SimilarityError::EmptyForeground)?;
    let cb = b.centroid().ok_or(SimilarityError::EmptyForeground)?;
    let dy = round_half_up(ca.0 - cb.0);
    let dx = round_half_up(ca.1 - cb.1);
    let moved = b.translated(dx, dy);
    Ok(jaccard_raw(a, &moved, (dx, dy)))
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn check_dims(a: &BinarySilhouette, b: &BinarySilhouette) -> Result<(), SimilarityError> {
    if a.width != b.width || a.height != b.height {
        return Err(SimilarityError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Pair the frames of two cycles at equal normalized phase: frame j of the
/// second cycle pairs with frame round(j * len_a / len_b) of the first.
pub fn phase_pair_indices(len_a: usize, len_b: usize) -> Result<Vec<(usize, usize)>, SimilarityError> {
    if len_a == 0 || len_b == 0 {
        return Err(SimilarityError::EmptyCycle);
    }
    Ok((0..len_b)
        .map(|j| {
            let i = round_half_up(j as f64 * len_a as f64 / len_b as f64) as usize;
            (i.min(len_a - 1), j)
        })
        .collect())
}

/// Pair silhouettes of two cycles at equal normalized phase.
pub fn phase_pair_silhouettes<'a>(
    cycle_a: &'a [BinarySilhouette],
    cycle_b: &'a [BinarySilhouette],
) -> Result<Vec<(&'a BinarySilhouette, &'a BinarySilhouette)>, SimilarityError> {
    let idx = phase_pair_indices(cycle_a.len(), cycle_b.len())?;
    Ok(idx.into_iter().map(|(i, j)| (&cycle_a[i], &cycle_b[j])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityStats {
    pub subject: String,
    pub samples: Vec<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Order statistics with type-7 (linear interpolation) quartiles.
pub fn similarity_stats(values: &[f64], subject: &str) -> Result<SimilarityStats, SimilarityError> {
    if values.is_empty() {
        return Err(SimilarityError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(SimilarityStats {
        subject: subject.to_string(),
        samples: values.to_vec(),
        min: sorted[0],
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        max: *sorted.last().unwrap(),
    })
}
