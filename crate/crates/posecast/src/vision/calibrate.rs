//! Calibration from the spread-arm pose: one frame yields the binarization
//! threshold, body and arm geometry, and the skin intensity band.

use crate::frame::{histogram, Frame, Region};
use crate::math::Vec2;

use super::components::connected_components;
use super::threshold::{binarize, dynamic_threshold_with};
use super::{Calibration, VisionConfig, VisionError};

/// Calibrate with the default [`VisionConfig`].
pub fn calibrate(frame: &Frame) -> Result<Calibration, VisionError> {
    calibrate_with(frame, &VisionConfig::default())
}

/// Measure the user against the dark background.
///
/// The frame must show the calibration pose: arms horizontal, spread wide.
/// Binarization uses the raw (unsmoothed) frame; the histogram valley sits
/// well above the background noise so the mask is clean without blurring,
/// and the unblurred edges keep the width measurements within a pixel.
pub fn calibrate_with(frame: &Frame, cfg: &VisionConfig) -> Result<Calibration, VisionError> {
    let hist = histogram(frame, Region::full(frame))?;
    let threshold = dynamic_threshold_with(&hist, cfg.valley_prominence)?;
    let mask = binarize(frame, threshold);
    let comps = connected_components(&mask);
    let sil = comps.largest().ok_or(VisionError::SilhouetteMissing)?;
    let stats = *comps.stats_of(sil);

    let w = frame.width();
    let h = frame.height();

    // Box-B analysis: column sums over the lower half of the silhouette.
    // The torso is the run of high sums; its edges are the sharp changes.
    let mut col_sums = vec![0u32; w as usize];
    for y in h / 2..h {
        for x in 0..w {
            if comps.is(x as i64, y as i64, sil) {
                col_sums[x as usize] += 1;
            }
        }
    }
    let (peak_x, &peak) = col_sums
        .iter()
        .enumerate()
        .max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))
        .expect("frame has columns");
    if peak == 0 {
        return Err(VisionError::CalibrationPose(
            "no silhouette in the lower half of the frame",
        ));
    }
    let cut = peak / 2;
    let mut left_edge = peak_x;
    while left_edge > 0 && col_sums[left_edge - 1] > cut {
        left_edge -= 1;
    }
    let mut right_edge = peak_x;
    while right_edge + 1 < w as usize && col_sums[right_edge + 1] > cut {
        right_edge += 1;
    }
    let body_width = (right_edge - left_edge + 1) as f64;
    let body_center_x = (left_edge + right_edge) as f64 / 2.0;

    // Arms-extended check: the full silhouette must span well past the body.
    let extent = (stats.max_x - stats.min_x + 1) as f64;
    if extent < cfg.min_extent_ratio * body_width {
        return Err(VisionError::CalibrationPose("arms not extended"));
    }

    // Arm columns: outside the body run. Column thickness there is the arm
    // capsule; its median is the arm width, and the median row is the
    // shoulder line.
    let mut thicknesses: Vec<u32> = Vec::new();
    let mut arm_rows: Vec<u32> = Vec::new();
    for x in 0..w as usize {
        if x >= left_edge && x <= right_edge {
            continue;
        }
        let mut count = 0;
        for y in 0..h {
            if comps.is(x as i64, y as i64, sil) {
                count += 1;
                arm_rows.push(y);
            }
        }
        if count > 0 {
            thicknesses.push(count);
        }
    }
    if thicknesses.len() < 4 {
        return Err(VisionError::CalibrationPose("arms not visible"));
    }
    thicknesses.sort_unstable();
    let arm_width = thicknesses[thicknesses.len() / 2] as f64;
    arm_rows.sort_unstable();
    let shoulder_row = arm_rows[arm_rows.len() / 2] as f64;

    let shoulder_width = cfg.shoulder_ratio * body_width;
    let shoulder_left = Vec2::new(body_center_x - shoulder_width / 2.0, shoulder_row);
    let shoulder_right = Vec2::new(body_center_x + shoulder_width / 2.0, shoulder_row);

    // The silhouette extremes are the fist tips; wrists sit half an arm
    // width inside them.
    let arm_len_right = (stats.max_x as f64 - arm_width / 2.0) - shoulder_right.x;
    let arm_len_left = shoulder_left.x - (stats.min_x as f64 + arm_width / 2.0);
    let arm_len = (arm_len_left + arm_len_right) / 2.0;

    // Box-A analysis: intensities of the head region (the silhouette above
    // the arm band) give the skin shade.
    let head_cutoff = shoulder_row - arm_width;
    let mut skin_samples: Vec<u8> = Vec::new();
    for y in 0..h {
        if (y as f64) >= head_cutoff {
            break;
        }
        for x in 0..w {
            if comps.is(x as i64, y as i64, sil) {
                skin_samples.push(frame.get(x, y));
            }
        }
    }
    if skin_samples.len() < 16 {
        return Err(VisionError::CalibrationPose("head region not found"));
    }
    skin_samples.sort_unstable();
    let pct = |p: f64| -> u8 {
        let idx = ((p / 100.0) * (skin_samples.len() - 1) as f64).round() as usize;
        skin_samples[idx]
    };
    let skin_lo = pct(cfg.skin_percentiles.0).saturating_sub(cfg.skin_band_margin);
    let skin_hi = pct(cfg.skin_percentiles.1).saturating_add(cfg.skin_band_margin);

    let calib = Calibration {
        threshold,
        skin_lo,
        skin_hi,
        arm_len,
        upper_arm_len: cfg.upper_arm_ratio * arm_len,
        arm_width,
        shoulder_width,
        body_width,
        shoulder_left,
        shoulder_right,
        body_center_x,
        frame_width: w,
        frame_height: h,
    };
    calib.validate()?;
    Ok(calib)
}
