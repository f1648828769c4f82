//! 2D-to-3D arm lifting by foreshortening, and conversion of lifted poses to
//! the twelve-slot joint-angle frame that travels on the wire.
//!
//! A projected segment of length `l` from a limb of known length `L` leaves
//! the out-of-plane angle `phi = arccos(l/L)`; only the sign of the depth
//! offset is unknowable from one view. That sign defaults toward the camera
//! and is carried over from the previous frame when one is supplied.

use thiserror::Error;

use crate::math::{Mat3, Vec2, Vec3};
use crate::num::{rad_to_deg, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PoseError {
    #[error("segment full length must be positive")]
    ZeroSegmentLength,
    #[error("degenerate pose: {0} segment has zero length")]
    DegenerateOrientation(&'static str),
}

/// The twelve transmitted angle slots, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum JointSlot {
    NeckPitch = 0,
    NeckYaw = 1,
    LeftShoulderAzimuth = 2,
    LeftShoulderElevation = 3,
    LeftShoulderRoll = 4,
    LeftElbow = 5,
    RightShoulderAzimuth = 6,
    RightShoulderElevation = 7,
    RightShoulderRoll = 8,
    RightElbow = 9,
    LeftWrist = 10,
    RightWrist = 11,
}

pub const SLOT_COUNT: usize = 12;

pub const SLOT_NAMES: [&str; SLOT_COUNT] = [
    "neck_pitch",
    "neck_yaw",
    "l_shoulder_az",
    "l_shoulder_el",
    "l_shoulder_roll",
    "l_elbow",
    "r_shoulder_az",
    "r_shoulder_el",
    "r_shoulder_roll",
    "r_elbow",
    "l_wrist",
    "r_wrist",
];

/// Per-frame joint angles in degrees plus the per-arm occlusion flags.
///
/// The zero frame is the T-pose reference: arms horizontal in the image
/// plane, elbows straight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAngleFrame<T = crate::Scalar> {
    pub slots: [T; SLOT_COUNT],
    pub left_occluded: bool,
    pub right_occluded: bool,
}

impl<T: Real> JointAngleFrame<T> {
    pub fn zero() -> Self {
        Self {
            slots: [T::zero(); SLOT_COUNT],
            left_occluded: false,
            right_occluded: false,
        }
    }

    pub fn get(&self, slot: JointSlot) -> T {
        self.slots[slot as usize]
    }

    pub fn set(&mut self, slot: JointSlot, value: T) {
        self.slots[slot as usize] = value;
    }

    /// Mirror image of the pose: left/right slots swapped, azimuths negated.
    pub fn mirrored(&self) -> Self {
        let mut out = *self;
        for (l, r) in [(2usize, 6usize), (3, 7), (4, 8), (5, 9), (10, 11)] {
            out.slots[l] = self.slots[r];
            out.slots[r] = self.slots[l];
        }
        out.slots[JointSlot::LeftShoulderAzimuth as usize] =
            -out.slots[JointSlot::LeftShoulderAzimuth as usize];
        out.slots[JointSlot::RightShoulderAzimuth as usize] =
            -out.slots[JointSlot::RightShoulderAzimuth as usize];
        out.left_occluded = self.right_occluded;
        out.right_occluded = self.left_occluded;
        out
    }
}

/// Closed per-slot angle intervals in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits<T = crate::Scalar> {
    pub ranges: [[T; 2]; SLOT_COUNT],
}

impl<T: Real> Default for JointLimits<T> {
    /// Anthropometric ballpark ranges. Azimuth is signed so that the left
    /// interval is the mirror of the right one: swapping arm slots and
    /// negating azimuths always maps an in-limit pose to an in-limit pose.
    fn default() -> Self {
        let deg = |lo: f64, hi: f64| [T::of(lo), T::of(hi)];
        Self {
            ranges: [
                deg(-45.0, 45.0),  // neck pitch
                deg(-75.0, 75.0),  // neck yaw
                deg(-180.0, 60.0), // l shoulder azimuth (negative = forward)
                deg(-90.0, 90.0),  // l shoulder elevation
                deg(-90.0, 90.0),  // l shoulder roll
                deg(0.0, 150.0),   // l elbow
                deg(-60.0, 180.0), // r shoulder azimuth (positive = forward)
                deg(-90.0, 90.0),  // r shoulder elevation
                deg(-90.0, 90.0),  // r shoulder roll
                deg(0.0, 150.0),   // r elbow
                deg(-60.0, 60.0),  // l wrist
                deg(-60.0, 60.0),  // r wrist
            ],
        }
    }
}

impl<T: Real> JointLimits<T> {
    pub fn contains(&self, frame: &JointAngleFrame<T>) -> bool {
        self.violation(frame).is_none()
    }

    /// First out-of-range slot, if any.
    pub fn violation(&self, frame: &JointAngleFrame<T>) -> Option<usize> {
        frame
            .slots
            .iter()
            .zip(self.ranges.iter())
            .position(|(v, [lo, hi])| *v < *lo || *v > *hi)
    }
}

/// Bitset of slots adjusted by [`clamp_to_limits`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampedSlots(pub u16);

impl ClampedSlots {
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, slot: JointSlot) -> bool {
        self.0 & (1 << slot as u16) != 0
    }
}

/// Clamp every slot into its interval; the returned set records which slots
/// moved. Values exactly at a limit are left alone.
pub fn clamp_to_limits<T: Real>(
    frame: &JointAngleFrame<T>,
    limits: &JointLimits<T>,
) -> (JointAngleFrame<T>, ClampedSlots) {
    let mut out = *frame;
    let mut clamped = ClampedSlots::default();
    for (i, (v, [lo, hi])) in out.slots.iter_mut().zip(limits.ranges.iter()).enumerate() {
        if *v < *lo {
            *v = *lo;
            clamped.0 |= 1 << i;
        } else if *v > *hi {
            *v = *hi;
            clamped.0 |= 1 << i;
        }
    }
    (out, clamped)
}

/// Depth direction of a lifted segment relative to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthSign {
    #[default]
    TowardCamera,
    AwayFromCamera,
}

impl DepthSign {
    pub fn factor<T: Real>(self) -> T {
        match self {
            DepthSign::TowardCamera => T::one(),
            DepthSign::AwayFromCamera => -T::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            DepthSign::TowardCamera => DepthSign::AwayFromCamera,
            DepthSign::AwayFromCamera => DepthSign::TowardCamera,
        }
    }
}

/// Result of lifting one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedSegment<T> {
    pub offset: Vec3<T>,
    pub sign: DepthSign,
    /// Out-of-plane angle recovered from foreshortening, degrees in [0, 90].
    pub out_of_plane_deg: T,
    /// Projection was longer than the physical segment (noise); the lift was
    /// clamped to the image plane.
    pub over_length: bool,
}

/// Lift a projected segment to 3D from its known physical length.
pub fn lift_segment<T: Real>(
    p0: Vec2<T>,
    p1: Vec2<T>,
    full_len: T,
    prev_sign: Option<DepthSign>,
) -> Result<LiftedSegment<T>, PoseError> {
    if full_len <= T::zero() {
        return Err(PoseError::ZeroSegmentLength);
    }
    let planar = p1 - p0;
    let l = planar.norm();
    let sign = prev_sign.unwrap_or_default();
    let over_length = l > full_len;
    let ratio = (l / full_len).min(T::one());
    let phi = ratio.acos();
    let depth = if over_length {
        T::zero()
    } else {
        sign.factor::<T>() * full_len * phi.sin()
    };
    Ok(LiftedSegment {
        offset: Vec3::new(planar.x, planar.y, depth),
        sign,
        out_of_plane_deg: rad_to_deg(if over_length { T::zero() } else { phi }),
        over_length,
    })
}

/// One lifted arm in the camera frame. The shoulder anchors at z = 0; the x
/// and y of every joint are copied verbatim from the 2D keypoints, so
/// dropping z reprojects exactly onto the detected input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose3D<T = crate::Scalar> {
    pub shoulder: Vec3<T>,
    pub elbow: Vec3<T>,
    pub wrist: Vec3<T>,
    pub upper_sign: DepthSign,
    pub fore_sign: DepthSign,
    pub upper_over_length: bool,
    pub fore_over_length: bool,
}

impl<T: Real> ArmPose3D<T> {
    /// The companion pose with both depth signs flipped. It has the same
    /// orthographic projection: the one-view ambiguity made explicit.
    pub fn depth_flipped(&self) -> Self {
        let flip = |p: Vec3<T>, anchor_z: T| Vec3::new(p.x, p.y, anchor_z - (p.z - anchor_z));
        let sz = self.shoulder.z;
        Self {
            shoulder: self.shoulder,
            elbow: flip(self.elbow, sz),
            wrist: flip(self.wrist, sz),
            upper_sign: self.upper_sign.flipped(),
            fore_sign: self.fore_sign.flipped(),
            upper_over_length: self.upper_over_length,
            fore_over_length: self.fore_over_length,
        }
    }
}

/// Lift a whole arm: shoulder->elbow with the upper-arm length, then
/// elbow->wrist with the forearm length. Depth signs default toward the
/// camera and follow `prev` when given.
pub fn lift_arm<T: Real>(
    shoulder: Vec2<T>,
    elbow: Vec2<T>,
    wrist: Vec2<T>,
    upper_len: T,
    forearm_len: T,
    prev: Option<&ArmPose3D<T>>,
) -> Result<ArmPose3D<T>, PoseError> {
    let upper = lift_segment(shoulder, elbow, upper_len, prev.map(|p| p.upper_sign))?;
    let fore = lift_segment(elbow, wrist, forearm_len, prev.map(|p| p.fore_sign))?;
    let elbow_z = upper.offset.z;
    Ok(ArmPose3D {
        shoulder: Vec3::new(shoulder.x, shoulder.y, T::zero()),
        elbow: Vec3::new(elbow.x, elbow.y, elbow_z),
        wrist: Vec3::new(wrist.x, wrist.y, elbow_z + fore.offset.z),
        upper_sign: upper.sign,
        fore_sign: fore.sign,
        upper_over_length: upper.over_length,
        fore_over_length: fore.over_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmSide {
    Left,
    Right,
}

/// Shoulder azimuth/elevation/roll plus elbow flexion (degrees) read off a
/// lifted arm. Inverse of the rigid chain in [`crate::skeleton`].
pub fn arm_angles<T: Real>(pose: &ArmPose3D<T>, side: ArmSide) -> Result<[T; 4], PoseError> {
    let mut upper = pose.elbow - pose.shoulder;
    let mut fore = pose.wrist - pose.elbow;
    if side == ArmSide::Left {
        // The left chain is the mirror of the right with azimuth negated.
        upper = upper.mirror_x();
        fore = fore.mirror_x();
    }
    let ul = upper.norm();
    let fl = fore.norm();
    if ul <= T::zero() {
        return Err(PoseError::DegenerateOrientation("upper-arm"));
    }
    if fl <= T::zero() {
        return Err(PoseError::DegenerateOrientation("forearm"));
    }

    let sin_el = (-upper.y / ul).max(-T::one()).min(T::one());
    let elevation = sin_el.asin();
    let azimuth = if upper.x == T::zero() && upper.z == T::zero() {
        T::zero()
    } else {
        upper.z.atan2(upper.x)
    };

    // Forearm direction in the post-elevation shoulder frame.
    let frame = Mat3::rot_y(-azimuth) * Mat3::rot_z(-elevation);
    let local = frame.transpose() * (fore / fl);
    let flexion = local.x.max(-T::one()).min(T::one()).acos();
    let roll = if flexion.sin().abs() < T::of(1e-9) {
        T::zero()
    } else {
        (-local.y).atan2(local.z)
    };

    let az_sign = match side {
        ArmSide::Right => T::one(),
        ArmSide::Left => -T::one(),
    };
    Ok([
        rad_to_deg(azimuth) * az_sign,
        rad_to_deg(elevation),
        rad_to_deg(roll),
        rad_to_deg(flexion),
    ])
}

/// Convert two lifted arms into a clamped twelve-slot frame.
///
/// Neck slots are not observable by this front-end and transmit as zero;
/// wrist flexion likewise (a wrist keypoint alone does not orient the palm).
pub fn angles_from_pose<T: Real>(
    left: &ArmPose3D<T>,
    right: &ArmPose3D<T>,
    limits: &JointLimits<T>,
) -> Result<(JointAngleFrame<T>, ClampedSlots), PoseError> {
    let l = arm_angles(left, ArmSide::Left)?;
    let r = arm_angles(right, ArmSide::Right)?;
    let mut frame = JointAngleFrame::zero();
    frame.slots[2..6].copy_from_slice(&l);
    frame.slots[6..10].copy_from_slice(&r);
    Ok(clamp_to_limits(&frame, limits))
}

/// Header of the angle CSV export.
pub fn csv_header() -> String {
    let mut cols: Vec<&str> = SLOT_NAMES.to_vec();
    cols.push("l_occluded");
    cols.push("r_occluded");
    cols.join(",")
}

/// One CSV row: twelve angles in degrees plus the two occlusion flags.
pub fn csv_row<T: Real>(frame: &JointAngleFrame<T>) -> String {
    let mut fields: Vec<String> = frame
        .slots
        .iter()
        .map(|v| format!("{:.4}", v.as_f64()))
        .collect();
    fields.push(u8::from(frame.left_occluded).to_string());
    fields.push(u8::from(frame.right_occluded).to_string());
    fields.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type V2 = Vec2<f64>;

    #[test]
    fn in_plane_segment_has_zero_depth() {
        let s = lift_segment(V2::new(0.0, 0.0), V2::new(80.0, 0.0), 80.0, None).unwrap();
        assert_eq!(s.offset, Vec3::new(80.0, 0.0, 0.0));
        assert!(s.out_of_plane_deg.abs() < 1e-9);
    }

    #[test]
    fn half_length_projection_is_sixty_degrees() {
        let s = lift_segment(V2::new(0.0, 0.0), V2::new(40.0, 0.0), 80.0, None).unwrap();
        assert!((s.out_of_plane_deg - 60.0).abs() < 1e-9);
        assert!((s.offset.z - 80.0 * 60f64.to_radians().sin()).abs() < 1e-9);
    }

    #[test]
    fn zero_projection_points_at_camera() {
        for (prev, want) in [
            (None, 80.0),
            (Some(DepthSign::TowardCamera), 80.0),
            (Some(DepthSign::AwayFromCamera), -80.0),
        ] {
            let s = lift_segment(V2::new(5.0, 5.0), V2::new(5.0, 5.0), 80.0, prev).unwrap();
            assert!((s.out_of_plane_deg - 90.0).abs() < 1e-9);
            assert_eq!(s.offset, Vec3::new(0.0, 0.0, want));
        }
    }

    #[test]
    fn over_length_projection_clamps_to_plane() {
        let s = lift_segment(V2::new(0.0, 0.0), V2::new(90.0, 0.0), 80.0, None).unwrap();
        assert!(s.over_length);
        assert_eq!(s.offset.z, 0.0);
        // x/y pass through untouched so reprojection stays exact.
        assert_eq!(s.offset.x, 90.0);
    }

    #[test]
    fn zero_full_length_is_an_error() {
        assert_eq!(
            lift_segment(V2::zero(), V2::new(1.0, 0.0), 0.0, None),
            Err(PoseError::ZeroSegmentLength)
        );
    }

    #[test]
    fn t_pose_lifts_flat() {
        let arm = lift_arm(
            V2::new(100.0, 50.0),
            V2::new(180.0, 50.0),
            V2::new(250.0, 50.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        assert_eq!(arm.elbow.z, 0.0);
        assert_eq!(arm.wrist.z, 0.0);
    }

    #[test]
    fn coincident_wrist_goes_full_depth() {
        let arm = lift_arm(
            V2::new(0.0, 0.0),
            V2::new(80.0, 0.0),
            V2::new(80.0, 0.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        assert!((arm.wrist.z - 70.0).abs() < 1e-9);
    }

    #[test]
    fn lifted_lengths_match_physical_lengths() {
        let arm = lift_arm(
            V2::new(10.0, 20.0),
            V2::new(50.0, 60.0),
            V2::new(60.0, 90.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        assert!((arm.elbow.distance(arm.shoulder) - 80.0).abs() < 1e-9);
        assert!((arm.wrist.distance(arm.elbow) - 70.0).abs() < 1e-9);
    }

    #[test]
    fn t_pose_angles_are_all_zero() {
        let left = lift_arm(
            V2::new(100.0, 50.0),
            V2::new(20.0, 50.0),
            V2::new(-50.0, 50.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        let right = lift_arm(
            V2::new(200.0, 50.0),
            V2::new(280.0, 50.0),
            V2::new(350.0, 50.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        let (frame, clamped) =
            angles_from_pose(&left, &right, &JointLimits::default()).unwrap();
        assert!(clamped.is_empty());
        for v in frame.slots {
            assert!(v.abs() < 1e-9, "slot nonzero: {v}");
        }
    }

    #[test]
    fn hanging_arm_reads_minus_ninety_elevation() {
        let right = lift_arm(
            V2::new(200.0, 50.0),
            V2::new(200.0, 130.0),
            V2::new(200.0, 200.0),
            80.0,
            70.0,
            None,
        )
        .unwrap();
        let a = arm_angles(&right, ArmSide::Right).unwrap();
        assert!((a[1] + 90.0).abs() < 1e-9, "elevation {}", a[1]);
        assert!(a[3].abs() < 1e-9, "flexion {}", a[3]);
    }

    #[test]
    fn previous_pose_carries_depth_signs() {
        let s = V2::new(0.0, 0.0);
        let e = V2::new(40.0, 0.0);
        let w = V2::new(60.0, 0.0);
        let first = lift_arm(s, e, w, 80.0, 70.0, None).unwrap();
        assert!(first.elbow.z > 0.0, "default lifts toward the camera");

        let mut away = first;
        away.upper_sign = DepthSign::AwayFromCamera;
        away.fore_sign = DepthSign::AwayFromCamera;
        let next = lift_arm(s, e, w, 80.0, 70.0, Some(&away)).unwrap();
        assert!(next.elbow.z < 0.0, "continuity keeps the away-facing depth");
        assert!(next.wrist.z < next.elbow.z);
        assert_eq!(next.upper_sign, DepthSign::AwayFromCamera);
    }

    #[test]
    fn clamp_flags_only_what_it_moves() {
        let limits = JointLimits::<f64>::default();
        let mut frame = JointAngleFrame::zero();
        frame.set(JointSlot::RightElbow, 200.0);
        let (out, clamped) = clamp_to_limits(&frame, &limits);
        assert_eq!(out.get(JointSlot::RightElbow), 150.0);
        assert!(clamped.contains(JointSlot::RightElbow));
        assert_eq!(clamped.0.count_ones(), 1);

        // Values exactly at the limits survive untouched.
        let mut edge = JointAngleFrame::zero();
        for (i, [lo, _]) in limits.ranges.iter().enumerate() {
            edge.slots[i] = *lo;
        }
        let (out, clamped) = clamp_to_limits(&edge, &limits);
        assert_eq!(out, edge);
        assert!(clamped.is_empty());

        // Idempotent.
        let (again, c2) = clamp_to_limits(&out, &limits);
        assert_eq!(again, out);
        assert!(c2.is_empty());
    }

    #[test]
    fn csv_row_shape() {
        assert_eq!(csv_header().split(',').count(), 14);
        let frame: JointAngleFrame<f64> = JointAngleFrame::zero();
        assert_eq!(csv_row(&frame).split(',').count(), 14);
    }

    proptest! {
        /// Flipping the depth signs never changes the projection.
        #[test]
        fn depth_flip_reprojects_identically(
            sx in -50.0f64..400.0, sy in -50.0f64..400.0,
            ex in -50.0f64..400.0, ey in -50.0f64..400.0,
            wx in -50.0f64..400.0, wy in -50.0f64..400.0,
        ) {
            let upper = 90.0;
            let fore = 75.0;
            let arm = lift_arm(
                V2::new(sx, sy), V2::new(ex, ey), V2::new(wx, wy),
                upper, fore, None,
            ).unwrap();
            let flipped = arm.depth_flipped();
            prop_assert_eq!(arm.shoulder.xy(), flipped.shoulder.xy());
            prop_assert_eq!(arm.elbow.xy(), flipped.elbow.xy());
            prop_assert_eq!(arm.wrist.xy(), flipped.wrist.xy());
            // And the input keypoints come back exactly.
            prop_assert_eq!(arm.elbow.xy(), V2::new(ex, ey));
            prop_assert_eq!(arm.wrist.xy(), V2::new(wx, wy));
        }

        /// Lifting conserves segment lengths whenever nothing clamps.
        #[test]
        fn lift_conserves_lengths(
            ex in -80.0f64..80.0, ey in -80.0f64..80.0,
            wx in -70.0f64..70.0, wy in -70.0f64..70.0,
        ) {
            let s = V2::new(100.0, 100.0);
            let e = s + V2::new(ex, ey);
            let w = e + V2::new(wx, wy);
            let upper = 90.0;
            let fore = 75.0;
            prop_assume!(e.distance(s) <= upper && w.distance(e) <= fore);
            let arm = lift_arm(s, e, w, upper, fore, None).unwrap();
            prop_assert!((arm.elbow.distance(arm.shoulder) - upper).abs() < 1e-9);
            prop_assert!((arm.wrist.distance(arm.elbow) - fore).abs() < 1e-9);
        }
    }
}
