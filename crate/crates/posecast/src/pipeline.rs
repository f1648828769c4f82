//! Frame-to-angles composition: detect keypoints, lift both arms by
//! foreshortening, read off the twelve joint angles, clamp into limits.
//!
//! The tracker carries the previous frame's keypoints and depth signs for
//! continuity, and on a per-frame failure repeats the last angles (at
//! confidence zero) so a downstream animation never starves.

use crate::frame::Frame;
use crate::pose3d::{
    angles_from_pose, lift_arm, ArmPose3D, ClampedSlots, JointAngleFrame, JointLimits,
};
use crate::vision::{
    detect_keypoints_with, Arm2D, ArmKeypoints2D, Calibration, VisionConfig, VisionError,
};
use crate::Scalar;

#[derive(Debug, Clone, Default)]
pub struct TrackerConfig {
    pub vision: VisionConfig,
    pub limits: JointLimits<Scalar>,
}

pub struct Tracker {
    calib: Calibration,
    config: TrackerConfig,
    prev_keys: Option<ArmKeypoints2D>,
    prev_left: Option<ArmPose3D>,
    prev_right: Option<ArmPose3D>,
    last_angles: Option<JointAngleFrame<Scalar>>,
}

/// Result of tracking one frame.
#[derive(Debug, Clone)]
pub struct TrackedFrame {
    pub angles: JointAngleFrame<Scalar>,
    pub clamped: ClampedSlots,
    /// Keypoints and lifted arms; None when this frame carried the
    /// previous angles after a detection failure.
    pub keypoints: Option<ArmKeypoints2D>,
    pub left_pose: Option<ArmPose3D>,
    pub right_pose: Option<ArmPose3D>,
    /// Detection failure message when the frame was carried.
    pub warning: Option<String>,
}

impl Tracker {
    pub fn new(calib: Calibration, config: TrackerConfig) -> Self {
        Self {
            calib,
            config,
            prev_keys: None,
            prev_left: None,
            prev_right: None,
            last_angles: None,
        }
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calib
    }

    fn lift(&self, arm: &Arm2D, prev: Option<&ArmPose3D>) -> ArmPose3D {
        lift_arm(
            arm.shoulder,
            arm.elbow,
            arm.wrist,
            self.calib.upper_arm_len,
            self.calib.forearm_len(),
            prev,
        )
        .expect("calibrated segment lengths are positive")
    }

    /// Track one frame; never fails once constructed, falling back to the
    /// previous (or zero) angles on detection errors.
    pub fn track(&mut self, frame: &Frame) -> TrackedFrame {
        match detect_keypoints_with(frame, &self.calib, self.prev_keys.as_ref(), &self.config.vision)
        {
            Ok(keys) => {
                let left = self.lift(&keys.left, self.prev_left.as_ref());
                let right = self.lift(&keys.right, self.prev_right.as_ref());
                let (mut angles, clamped) = angles_from_pose(&left, &right, &self.config.limits)
                    .expect("lifted segments have calibrated nonzero lengths");
                angles.left_occluded = keys.left.occluded;
                angles.right_occluded = keys.right.occluded;
                self.prev_keys = Some(keys);
                self.prev_left = Some(left);
                self.prev_right = Some(right);
                self.last_angles = Some(angles);
                TrackedFrame {
                    angles,
                    clamped,
                    keypoints: Some(keys),
                    left_pose: Some(left),
                    right_pose: Some(right),
                    warning: None,
                }
            }
            Err(err) => self.carry(err),
        }
    }

    fn carry(&mut self, err: VisionError) -> TrackedFrame {
        let angles = self.last_angles.unwrap_or_else(JointAngleFrame::zero);
        TrackedFrame {
            angles,
            clamped: ClampedSlots::default(),
            keypoints: None,
            left_pose: None,
            right_pose: None,
            warning: Some(err.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose3d::JointSlot;
    use crate::synth::{render_silhouette, BodyParams, GroundTruthPose, NoiseConfig};
    use crate::vision::calibrate;

    fn tracker() -> (BodyParams<f64>, Tracker) {
        let body = BodyParams::<f64>::default();
        let calib_frame = render_silhouette(
            &body,
            &GroundTruthPose::t_pose(),
            640,
            480,
            NoiseConfig::default(),
        )
        .unwrap();
        let calib = calibrate(&calib_frame).unwrap();
        (body, Tracker::new(calib, TrackerConfig::default()))
    }

    #[test]
    fn t_pose_tracks_to_near_zero_angles() {
        let (body, mut tracker) = tracker();
        let frame = render_silhouette(
            &body,
            &GroundTruthPose::t_pose(),
            640,
            480,
            NoiseConfig { sigma: 2.0, seed: 5 },
        )
        .unwrap();
        let out = tracker.track(&frame);
        assert!(out.warning.is_none());
        for (i, v) in out.angles.slots.iter().enumerate() {
            assert!(v.abs() < 6.0, "slot {i} = {v}");
        }
    }

    #[test]
    fn detection_failure_carries_previous_angles() {
        let (body, mut tracker) = tracker();
        let mut pose = GroundTruthPose::t_pose();
        pose.right.elevation = 30.0;
        let good = render_silhouette(&body, &pose, 640, 480, NoiseConfig::default()).unwrap();
        let first = tracker.track(&good);
        assert!(first.warning.is_none());
        let elbow_then = first.angles.get(JointSlot::RightShoulderElevation);

        let dark = Frame::filled(640, 480, 12);
        let carried = tracker.track(&dark);
        assert!(carried.warning.is_some());
        assert!(carried.keypoints.is_none());
        assert_eq!(
            carried.angles.get(JointSlot::RightShoulderElevation),
            elbow_then
        );
    }
}
