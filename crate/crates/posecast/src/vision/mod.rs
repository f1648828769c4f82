//! The inverse pipeline: calibration against the spread-arm pose, dynamic
//! threshold binarization, smoothing, silhouette analysis, keypoint
//! extraction and self-occlusion resolution.
//!
//! Everything here operates on 8-bit rasters against a dark background. A
//! calibration is produced once from the spread-arm frame and is then
//! shared (immutably) by every per-frame detection.

mod calibrate;
mod components;
mod detect;
mod smooth;
mod threshold;

pub use calibrate::{calibrate, calibrate_with};
pub use components::{connected_components, ComponentMap, ComponentStats};
pub use detect::{detect_keypoints, detect_keypoints_with, Arm2D, ArmKeypoints2D, DetectionBranch};
pub use smooth::gaussian_smooth;
pub use threshold::{binarize, dynamic_threshold, dynamic_threshold_with};

use thiserror::Error;

use crate::frame::{Frame, FrameError};
use crate::math::Vec2;
use crate::synth::{SHOULDER_TO_BODY_WIDTH_RATIO, UPPER_ARM_RATIO};
use crate::{Point2, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum VisionError {
    #[error("no contrast: intensity histogram has no usable valley")]
    NoContrast,
    #[error("calibration pose error: {0}")]
    CalibrationPose(&'static str),
    #[error("no silhouette found in frame")]
    SilhouetteMissing,
    #[error("ambiguous occlusion: no skin over the torso and no extreme point")]
    AmbiguousOcclusion,
    #[error("frame is {got_w}x{got_h} but calibration expects {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
    #[error("calibration file line {line}: {msg}")]
    CalibrationFile { line: usize, msg: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// One boolean per pixel, same dimensions as the source frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new_clear(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(frame: &Frame, mut f: impl FnMut(u8) -> bool) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            bits: frame.data().iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    /// In-bounds and set.
    #[inline]
    pub fn test(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u32) < self.width
            && (y as u32) < self.height
            && self.get(x as u32, y as u32)
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Pixels whose intensity falls inside the calibrated skin band.
pub fn skin_mask(frame: &Frame, calib: &Calibration) -> Mask {
    Mask::from_fn(frame, |v| v >= calib.skin_lo && v <= calib.skin_hi)
}

/// Per-user calibration measured from the spread-arm pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Binarization threshold (foreground is strictly above it).
    pub threshold: u8,
    /// Skin intensity band, inclusive.
    pub skin_lo: u8,
    pub skin_hi: u8,
    /// Shoulder-to-wrist length at full extension, pixels.
    pub arm_len: Scalar,
    pub upper_arm_len: Scalar,
    /// Full limb thickness, pixels.
    pub arm_width: Scalar,
    pub shoulder_width: Scalar,
    pub body_width: Scalar,
    pub shoulder_left: Point2,
    pub shoulder_right: Point2,
    pub body_center_x: Scalar,
    pub frame_width: u32,
    pub frame_height: u32,
}

impl Calibration {
    pub fn forearm_len(&self) -> Scalar {
        self.arm_len - self.upper_arm_len
    }

    pub fn torso_top(&self) -> Scalar {
        self.shoulder_left.y.min(self.shoulder_right.y)
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        if self.skin_lo > self.skin_hi {
            return Err(VisionError::BadParameter("skin band inverted"));
        }
        if self.upper_arm_len >= self.arm_len {
            return Err(VisionError::BadParameter("upper arm not shorter than arm"));
        }
        if self.arm_width >= self.upper_arm_len {
            return Err(VisionError::BadParameter("arm wider than upper arm length"));
        }
        let mid = (self.shoulder_left.x + self.shoulder_right.x) / 2.0;
        if (mid - self.body_center_x).abs() > 2.0 {
            return Err(VisionError::BadParameter("shoulders not symmetric"));
        }
        Ok(())
    }

    /// Column-mirrored calibration, for symmetry checks.
    pub fn mirrored(&self) -> Self {
        let w = self.frame_width as Scalar - 1.0;
        let mx = |p: Point2| Vec2::new(w - p.x, p.y);
        Self {
            shoulder_left: mx(self.shoulder_right),
            shoulder_right: mx(self.shoulder_left),
            body_center_x: w - self.body_center_x,
            ..self.clone()
        }
    }

    /// Serialize as the flat `key=value` calibration file.
    pub fn to_key_values(&self) -> String {
        format!(
            "threshold={}\nskin_lo={}\nskin_hi={}\narm_len={:.3}\nupper_arm_len={:.3}\n\
             arm_width={:.3}\nshoulder_width={:.3}\nbody_width={:.3}\n\
             shoulder_left_x={:.3}\nshoulder_left_y={:.3}\n\
             shoulder_right_x={:.3}\nshoulder_right_y={:.3}\n\
             body_center_x={:.3}\nframe_width={}\nframe_height={}\n",
            self.threshold,
            self.skin_lo,
            self.skin_hi,
            self.arm_len,
            self.upper_arm_len,
            self.arm_width,
            self.shoulder_width,
            self.body_width,
            self.shoulder_left.x,
            self.shoulder_left.y,
            self.shoulder_right.x,
            self.shoulder_right.y,
            self.body_center_x,
            self.frame_width,
            self.frame_height,
        )
    }

    pub fn from_key_values(text: &str) -> Result<Self, VisionError> {
        use std::collections::HashMap;
        let mut map: HashMap<&str, f64> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(VisionError::CalibrationFile {
                line,
                msg: "expected key=value".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| VisionError::CalibrationFile {
                line,
                msg: format!("'{}' is not a number", value.trim()),
            })?;
            map.insert(key.trim(), value);
        }
        let get = |key: &'static str| {
            map.get(key).copied().ok_or(VisionError::CalibrationFile {
                line: 0,
                msg: format!("missing key '{key}'"),
            })
        };
        let calib = Self {
            threshold: get("threshold")? as u8,
            skin_lo: get("skin_lo")? as u8,
            skin_hi: get("skin_hi")? as u8,
            arm_len: get("arm_len")?,
            upper_arm_len: get("upper_arm_len")?,
            arm_width: get("arm_width")?,
            shoulder_width: get("shoulder_width")?,
            body_width: get("body_width")?,
            shoulder_left: Vec2::new(get("shoulder_left_x")?, get("shoulder_left_y")?),
            shoulder_right: Vec2::new(get("shoulder_right_x")?, get("shoulder_right_y")?),
            body_center_x: get("body_center_x")?,
            frame_width: get("frame_width")? as u32,
            frame_height: get("frame_height")? as u32,
        };
        calib.validate()?;
        Ok(calib)
    }
}

/// Tunable detection parameters. The defaults are the contract the oracle
/// suites pin down; each knob exists because the underlying rule is a
/// convention, not physics.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionConfig {
    /// Gaussian sigma applied to the grayscale frame before binarization.
    pub smooth_sigma: f64,
    /// Minimum valley prominence as a fraction of the tallest mode.
    pub valley_prominence: f64,
    /// Fraction of shoulder-to-tip samples that must fall inside the
    /// silhouette for the straight-arm test.
    pub line_inside_frac: f64,
    /// Acceptable silhouette thickness band around the calibrated arm
    /// width, as (low, high) multipliers.
    pub width_band: (f64, f64),
    /// Fraction of distal samples that must sit inside the thickness band.
    pub width_band_frac: f64,
    /// Tolerance on segment lengths in the bent-arm search, fractional.
    pub length_tolerance: f64,
    /// Upper arm as a fraction of the full arm length.
    pub upper_arm_ratio: f64,
    /// Shoulder span as a fraction of the body width.
    pub shoulder_ratio: f64,
    /// Percentiles (low, high) of head-region intensities for the skin band.
    pub skin_percentiles: (f64, f64),
    /// Widening applied to each side of the percentile band, levels.
    pub skin_band_margin: u8,
    /// An extreme point closer to the torso region than this many arm
    /// widths flips the arm into the occlusion branch.
    pub occlusion_reach: f64,
    /// Calibration rejects frames whose silhouette spans less than this
    /// many body widths (arms not extended).
    pub min_extent_ratio: f64,
    /// Candidates scoring within this fraction of the best are ties and
    /// resolve toward the previous frame.
    pub tie_fraction: f64,
    /// A bend corner deflected off the shoulder-wrist chord by at least
    /// this many arm widths overrides a passing straight-line test.
    pub corner_deflection_ratio: f64,
    /// Head exclusion half-width above the torso, as a fraction of body width.
    pub head_col_ratio: f64,
    /// Torso band expansion, as a fraction of arm width.
    pub body_margin_ratio: f64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            smooth_sigma: 1.0,
            valley_prominence: 0.05,
            line_inside_frac: 0.90,
            width_band: (0.5, 1.5),
            width_band_frac: 0.85,
            length_tolerance: 0.25,
            upper_arm_ratio: UPPER_ARM_RATIO,
            shoulder_ratio: SHOULDER_TO_BODY_WIDTH_RATIO,
            skin_percentiles: (5.0, 95.0),
            skin_band_margin: 3,
            occlusion_reach: 1.0,
            min_extent_ratio: 1.5,
            tie_fraction: 0.05,
            corner_deflection_ratio: 0.75,
            head_col_ratio: 0.30,
            body_margin_ratio: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Calibration {
        Calibration {
            threshold: 31,
            skin_lo: 196,
            skin_hi: 214,
            arm_len: 160.0,
            upper_arm_len: 88.0,
            arm_width: 18.0,
            shoulder_width: 96.0,
            body_width: 120.0,
            shoulder_left: Vec2::new(272.0, 170.0),
            shoulder_right: Vec2::new(368.0, 170.0),
            body_center_x: 320.0,
            frame_width: 640,
            frame_height: 480,
        }
    }

    #[test]
    fn calibration_file_roundtrip() {
        let calib = sample();
        let text = calib.to_key_values();
        let back = Calibration::from_key_values(&text).unwrap();
        assert_eq!(back, calib);
    }

    #[test]
    fn calibration_file_errors_are_located() {
        let err = Calibration::from_key_values("threshold=abc\n").unwrap_err();
        assert!(matches!(err, VisionError::CalibrationFile { line: 1, .. }));
        let err = Calibration::from_key_values("threshold=10\n").unwrap_err();
        match err {
            VisionError::CalibrationFile { msg, .. } => assert!(msg.contains("missing key")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn calibration_invariants() {
        let mut c = sample();
        c.upper_arm_len = 200.0;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.shoulder_left.x = 250.0;
        assert!(c.validate().is_err());
    }

    /// In the self-occlusion scene, the skin band must retain nearly all
    /// arm pixels painted over the torso: that is what separates the hand
    /// from the body.
    #[test]
    fn skin_mask_keeps_arm_pixels_over_the_torso() {
        use crate::synth::{
            render_silhouette, sample_occluded_pose, BodyParams, DeterministicRng,
            GroundTruthPose, NoiseConfig, SampleSpace,
        };
        let body = BodyParams::<f64>::default();
        let calib_frame = render_silhouette(
            &body,
            &GroundTruthPose::t_pose(),
            640,
            480,
            NoiseConfig::default(),
        )
        .unwrap();
        let calib = crate::vision::calibrate(&calib_frame).unwrap();

        let mut rng = DeterministicRng::new(11);
        let pose = sample_occluded_pose(&mut rng, &body, &SampleSpace::default(), true);
        let noisy =
            render_silhouette(&body, &pose, 640, 480, NoiseConfig { sigma: 2.0, seed: 8 })
                .unwrap();
        let clean =
            render_silhouette(&body, &pose, 640, 480, NoiseConfig::disabled()).unwrap();
        let mask = skin_mask(&noisy, &calib);

        // Oracle count: skin-intensity pixels inside the torso rectangle.
        let half = body.torso_width() / 2.0;
        let mut total = 0u64;
        let mut kept = 0u64;
        for y in 0..clean.height() {
            for x in 0..clean.width() {
                let over_torso = (x as f64 - body.body_center_x).abs() <= half
                    && (y as f64) >= body.torso_top
                    && (y as f64) <= body.torso_top + body.torso_height;
                if over_torso && clean.get(x, y) == body.skin_intensity {
                    total += 1;
                    if mask.get(x, y) {
                        kept += 1;
                    }
                }
            }
        }
        assert!(total > 500, "occlusion scene has arm over torso ({total})");
        assert!(
            kept as f64 >= 0.9 * total as f64,
            "skin mask kept {kept}/{total} over-torso arm pixels"
        );
    }

    #[test]
    fn skin_mask_band_rules() {
        let c = sample();
        let clothing = Frame::filled(8, 8, 95);
        assert_eq!(skin_mask(&clothing, &c).count_set(), 0);

        let mut wide = c.clone();
        wide.skin_lo = 0;
        wide.skin_hi = 255;
        assert_eq!(skin_mask(&clothing, &wide).count_set(), 64);
    }
}
