//! Gait-cycle segmentation.
//!
//! The lower-body foreground pixel count peaks at full stride stance,
//! twice per gait cycle. Taking every second peak of that signal yields
//! the cycle boundaries.

use crate::raster::BinarySilhouette;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CycleError {
    #[error("frame {0} has no foreground pixels")]
    EmptyForeground(usize),
    #[error("fewer than 3 peaks; no complete gait cycle detected")]
    NoCyclesDetected,
}

/// Per-frame lower-body foreground count.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCountSignal {
    pub values: Vec<f64>,
    pub frame_rate: f64,
}

/// Half-open frame range of one gait cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRange {
    pub start_frame: usize,
    pub end_frame: usize,
}

impl FrameRange {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn is_empty(&self) -> bool {
        self.end_frame == self.start_frame
    }
}

/// Detection parameters, exposed in the pipeline config.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleParams {
    /// Fraction of the foreground bounding box counted as "lower body".
    pub lower_fraction: f64,
    /// Odd moving-average window in frames.
    pub smooth_window: usize,
    /// Minimum spacing between surviving peaks, frames.
    pub min_distance: usize,
    /// Minimum peak prominence as a fraction of the signal range.
    pub min_prominence_ratio: f64,
}

impl CycleParams {
    /// Defaults tuned for 25 fps input: window 5, min distance fps/4,
    /// prominence 2% of the signal range.
    pub fn for_fps(fps: f64) -> Self {
        Self {
            lower_fraction: 0.5,
            smooth_window: 5,
            min_distance: ((0.25 * fps).round() as usize).max(1),
            min_prominence_ratio: 0.02,
        }
    }
}

/// Count foreground pixels whose row lies in the bottom `lower_fraction`
/// of each frame's own foreground bounding box.
pub fn pixel_count_signal(
    masks: &[BinarySilhouette],
    lower_fraction: f64,
    frame_rate: f64,
) -> Result<PixelCountSignal, CycleError> {
    assert!(lower_fraction > 0.0 && lower_fraction <= 1.0);
    assert!(!masks.is_empty());
    let mut values = Vec::with_capacity(masks.len());
    for (fi, mask) in masks.iter().enumerate() {
        let (r0, _, r1, _) = mask.bounding_box().ok_or(CycleError::EmptyForeground(fi))?;
        let box_height = r1 - r0 + 1;
        let rows = ((lower_fraction * box_height as f64).round() as usize).clamp(1, box_height);
        let cut = r1 + 1 - rows; // first counted row
        let mut count = 0usize;
        for row in cut..=r1 {
            for col in 0..mask.width {
                if mask.get(row, col) {
                    count += 1;
                }
            }
        }
        values.push(count as f64);
    }
    Ok(PixelCountSignal { values, frame_rate })
}

/// Centered moving average with edge replication; window 1 is the identity.
pub fn smooth(signal: &PixelCountSignal, window: usize) -> PixelCountSignal {
    assert!(window >= 1 && window % 2 == 1, "window must be odd and >= 1");
    let n = signal.values.len() as i64;
    let half = (window / 2) as i64;
    let values = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for k in -half..=half {
                let idx = (i + k).clamp(0, n - 1);
                acc += signal.values[idx as usize];
            }
            acc / window as f64
        })
        .collect();
    PixelCountSignal { values, frame_rate: signal.frame_rate }
}

/// Strict local maxima (plateaus report their first index), filtered by
/// prominence, then thinned highest-first until survivors are at least
/// `min_distance` apart. Returned sorted ascending.
pub fn detect_peaks(signal: &PixelCountSignal, min_distance: usize, min_prominence: f64) -> Vec<usize> {
    assert!(min_distance >= 1);
    let v = &signal.values;
    let n = v.len();
    let mut candidates = Vec::new();
    let mut i = 1usize;
    while n >= 3 && i < n - 1 {
        if v[i] > v[i - 1] {
            // plateau scan
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                candidates.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    // prominence: height above the higher of the two flanking minima,
    // scanning outward until a strictly higher sample or the edge
    let prominent: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| {
            let peak = v[p];
            let mut left_min = peak;
            for k in (0..p).rev() {
                if v[k] > peak {
                    break;
                }
                left_min = left_min.min(v[k]);
            }
            let mut right_min = peak;
            for &x in &v[p + 1..] {
                if x > peak {
                    break;
                }
                right_min = right_min.min(x);
            }
            peak - left_min.max(right_min) >= min_prominence
        })
        .collect();

    // greedy thinning, highest first (ties: earlier index first)
    let mut order = prominent.clone();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in order {
        if kept.iter().all(|&q| p.abs_diff(q) >= min_distance) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

/// Every-second-peak rule: cycle i spans [peaks[2i], peaks[2i+2]).
/// Incomplete trailing cycles are discarded.
pub fn cycles_from_peaks(peaks: &[usize]) -> Result<Vec<FrameRange>, CycleError> {
    if peaks.len() < 3 {
        return Err(CycleError::NoCyclesDetected);
    }
    debug_assert!(peaks.windows(2).all(|w| w[0] < w[1]), "peaks must be sorted");
    let mut cycles = Vec::new();
    let mut i = 0usize;
    while 2 * i + 2 < peaks.len() {
        cycles.push(FrameRange { start_frame: peaks[2 * i], end_frame: peaks[2 * i + 2] });
        i += 1;
    }
    if cycles.is_empty() {
        return Err(CycleError::NoCyclesDetected);
    }
    Ok(cycles)
}

/// Full detection chain over a mask sequence.
pub fn detect_cycles(
    masks: &[BinarySilhouette],
    params: &CycleParams,
    frame_rate: f64,
) -> Result<(PixelCountSignal, PixelCountSignal, Vec<FrameRange>), CycleError> {
    let raw = pixel_count_signal(masks, params.lower_fraction, frame_rate)?;
    let smoothed = smooth(&raw, params.smooth_window);
    let range = smoothed.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smoothed.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prominence = params.min_prominence_ratio * (hi - range);
    let peaks = detect_peaks(&smoothed, params.min_distance, prominence);
    let cycles = cycles_from_peaks(&peaks)?;
    Ok((raw, smoothed, cycles))
}
