//! Dynamic binarization threshold from the intensity histogram.

use crate::frame::{Frame, Hist256};

use super::{Mask, VisionError};

/// Centered moving average over 5 bins; windows shrink at the edges.
fn smooth_histogram(hist: &Hist256) -> [f64; 256] {
    let mut out = [0.0; 256];
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(2);
        let hi = (i + 2).min(255);
        let sum: u64 = hist.counts[lo..=hi].iter().map(|&c| c as u64).sum();
        *slot = sum as f64 / (hi - lo + 1) as f64;
    }
    out
}

/// Pick the binarization threshold at the deepest valley between the two
/// dominant intensity modes.
///
/// Modes are located on the 5-bin-smoothed histogram (the second at least 5
/// bins from the first); the valley is the lowest raw count strictly
/// between them, ties resolving toward the lower intensity. A histogram
/// with no second mode, or with a valley of insufficient prominence, has no
/// usable contrast.
pub fn dynamic_threshold(hist: &Hist256) -> Result<u8, VisionError> {
    dynamic_threshold_with(hist, 0.05)
}

/// Local maxima of the smoothed histogram, plateau-aware: a run of equal
/// values is one mode (at its midpoint) when both neighbours sit lower.
pub(crate) fn smoothed_modes(smoothed: &[f64; 256]) -> Vec<(usize, f64)> {
    let mut modes = Vec::new();
    let mut i = 0usize;
    while i < 256 {
        let mut j = i;
        while j + 1 < 256 && smoothed[j + 1] == smoothed[i] {
            j += 1;
        }
        let left_lower = i == 0 || smoothed[i - 1] < smoothed[i];
        let right_lower = j == 255 || smoothed[j + 1] < smoothed[i];
        if left_lower && right_lower && smoothed[i] > 0.0 {
            modes.push(((i + j) / 2, smoothed[i]));
        }
        i = j + 1;
    }
    modes
}

/// The two dominant modes, at least 5 bins apart.
pub(crate) fn dominant_modes(smoothed: &[f64; 256]) -> Option<(usize, usize)> {
    let modes = smoothed_modes(smoothed);
    let m1 = modes
        .iter()
        .copied()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))?;
    let m2 = modes
        .iter()
        .copied()
        .filter(|m| m.0.abs_diff(m1.0) > 4)
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))?;
    Some((m1.0, m2.0))
}

pub fn dynamic_threshold_with(hist: &Hist256, min_prominence: f64) -> Result<u8, VisionError> {
    if hist.total() == 0 {
        return Err(VisionError::NoContrast);
    }
    let smoothed = smooth_histogram(hist);
    let (m1, m2) = dominant_modes(&smoothed).ok_or(VisionError::NoContrast)?;
    let (lo, hi) = (m1.min(m2), m1.max(m2));
    if hi - lo < 2 {
        return Err(VisionError::NoContrast);
    }

    let mut valley = lo + 1;
    let mut smoothed_min = f64::INFINITY;
    for (i, (&raw, &sm)) in hist
        .counts
        .iter()
        .zip(smoothed.iter())
        .enumerate()
        .take(hi)
        .skip(lo + 1)
    {
        if raw < hist.counts[valley] {
            valley = i;
        }
        smoothed_min = smoothed_min.min(sm);
    }

    let prominence = smoothed[lo].min(smoothed[hi]) - smoothed_min;
    if prominence < min_prominence * smoothed[m1] {
        return Err(VisionError::NoContrast);
    }
    Ok(valley as u8)
}

/// Foreground mask: set iff the pixel intensity is strictly above `t`.
pub fn binarize(frame: &Frame, t: u8) -> Mask {
    Mask::from_fn(frame, |v| v > t)
}
