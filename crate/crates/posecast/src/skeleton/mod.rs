//! Articulated upper-body model: joint hierarchy, forward kinematics over
//! rigid links, frustum-primitive meshing and OBJ export.
//!
//! Angle conventions (shared with the inverse in [`crate::pose3d`]):
//! shoulder rotations compose azimuth, then elevation, then roll; azimuth
//! turns about the vertical image axis, elevation tilts out of the
//! horizontal plane, roll spins the flexion plane about the arm axis. The
//! elbow and wrist are hinges; at zero roll their flexion swings the distal
//! segment toward the camera. The left chain is the exact mirror of the
//! right with azimuth negated, so swapping arm slots and negating azimuths
//! mirrors the figure.

mod mesh;
mod obj;

pub use mesh::{
    build_dancer_mesh, frustum_mesh, frustum_triangle_count, frustum_vertex_count, pose_mesh,
    BodyPart, FrustumPrimitive, PartCategory, TriMesh, PALM_LEN_RATIO,
};
pub use obj::export_obj;

use thiserror::Error;

use crate::math::{Mat3, Vec3};
use crate::num::{deg_to_rad, Real};
use crate::pose3d::{JointAngleFrame, JointLimits, JointSlot};
use crate::synth::BodyParams;

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("joint angle out of limits: slot {slot} ({name}) = {value} degrees")]
    OutOfLimits {
        slot: usize,
        name: &'static str,
        value: f64,
    },
    #[error("frustum needs at least 3 segments, got {0}")]
    TooFewSegments(u32),
    #[error("frustum needs at least 1 stack, got {0}")]
    TooFewStacks(u32),
    #[error("invalid frustum: {0}")]
    BadFrustum(&'static str),
}

/// Joint labels of the articulated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointLabel {
    Neck,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
}

/// One joint of the hierarchy: its degree-of-freedom count, parent link,
/// and the wire slots that drive it. Per-DOF limits come from the
/// [`JointLimits`] table through those slots; the neck's third rotation
/// (sideways tilt) has no wire slot and stays at its rest value.
#[derive(Debug, Clone, Copy)]
pub struct JointSpec {
    pub label: JointLabel,
    pub dof: usize,
    pub parent: Option<JointLabel>,
    pub wire_slots: &'static [JointSlot],
}

impl JointSpec {
    /// Per-DOF [min, max] intervals, degrees, for the driven DOFs.
    pub fn limits<T: Real>(&self, limits: &JointLimits<T>) -> Vec<[T; 2]> {
        self.wire_slots
            .iter()
            .map(|&s| limits.ranges[s as usize])
            .collect()
    }
}

/// The fixed upper-body hierarchy: a tree rooted at the torso, with a
/// 3-DOF neck, 3-DOF shoulders and 1-DOF elbow/wrist hinges.
pub const JOINT_HIERARCHY: [JointSpec; 7] = [
    JointSpec {
        label: JointLabel::Neck,
        dof: 3,
        parent: None,
        wire_slots: &[JointSlot::NeckPitch, JointSlot::NeckYaw],
    },
    JointSpec {
        label: JointLabel::LeftShoulder,
        dof: 3,
        parent: None,
        wire_slots: &[
            JointSlot::LeftShoulderAzimuth,
            JointSlot::LeftShoulderElevation,
            JointSlot::LeftShoulderRoll,
        ],
    },
    JointSpec {
        label: JointLabel::RightShoulder,
        dof: 3,
        parent: None,
        wire_slots: &[
            JointSlot::RightShoulderAzimuth,
            JointSlot::RightShoulderElevation,
            JointSlot::RightShoulderRoll,
        ],
    },
    JointSpec {
        label: JointLabel::LeftElbow,
        dof: 1,
        parent: Some(JointLabel::LeftShoulder),
        wire_slots: &[JointSlot::LeftElbow],
    },
    JointSpec {
        label: JointLabel::RightElbow,
        dof: 1,
        parent: Some(JointLabel::RightShoulder),
        wire_slots: &[JointSlot::RightElbow],
    },
    JointSpec {
        label: JointLabel::LeftWrist,
        dof: 1,
        parent: Some(JointLabel::LeftElbow),
        wire_slots: &[JointSlot::LeftWrist],
    },
    JointSpec {
        label: JointLabel::RightWrist,
        dof: 1,
        parent: Some(JointLabel::RightElbow),
        wire_slots: &[JointSlot::RightWrist],
    },
];

/// World positions and per-part rotations produced by forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkPose<T> {
    pub neck: Vec3<T>,
    pub left_shoulder: Vec3<T>,
    pub right_shoulder: Vec3<T>,
    pub left_elbow: Vec3<T>,
    pub right_elbow: Vec3<T>,
    pub left_wrist: Vec3<T>,
    pub right_wrist: Vec3<T>,
    pub neck_rot: Mat3<T>,
    pub left_upper_rot: Mat3<T>,
    pub right_upper_rot: Mat3<T>,
    pub left_fore_rot: Mat3<T>,
    pub right_fore_rot: Mat3<T>,
    pub left_palm_rot: Mat3<T>,
    pub right_palm_rot: Mat3<T>,
}

/// Rest-pose joint anchors derived from the body parameters.
pub fn rest_anchors<T: Real>(body: &BodyParams<T>) -> (Vec3<T>, Vec3<T>, Vec3<T>) {
    let half = body.shoulder_width / T::of(2.0);
    let neck = Vec3::new(body.body_center_x, body.torso_top, T::zero());
    let left = Vec3::new(body.body_center_x - half, body.torso_top, T::zero());
    let right = Vec3::new(body.body_center_x + half, body.torso_top, T::zero());
    (neck, left, right)
}

/// Rotations of one right-side arm chain. Left chains reuse this with
/// azimuth negated and the result mirror-conjugated.
fn right_chain_rotations<T: Real>(
    azimuth_deg: T,
    elevation_deg: T,
    roll_deg: T,
    elbow_deg: T,
    wrist_deg: T,
) -> (Mat3<T>, Mat3<T>, Mat3<T>) {
    let shoulder = Mat3::rot_y(-deg_to_rad(azimuth_deg))
        * Mat3::rot_z(-deg_to_rad(elevation_deg))
        * Mat3::rot_x(deg_to_rad(roll_deg));
    let fore = shoulder * Mat3::rot_y(-deg_to_rad(elbow_deg));
    let palm = fore * Mat3::rot_y(-deg_to_rad(wrist_deg));
    (shoulder, fore, palm)
}

/// Evaluate the rigid-link chain. The zero frame is the T-pose; left and
/// right chains are mirror images by construction.
pub fn forward_kinematics<T: Real>(
    frame: &JointAngleFrame<T>,
    body: &BodyParams<T>,
    limits: &JointLimits<T>,
) -> Result<FkPose<T>, SkeletonError> {
    if let Some(slot) = limits.violation(frame) {
        return Err(SkeletonError::OutOfLimits {
            slot,
            name: crate::pose3d::SLOT_NAMES[slot],
            value: frame.slots[slot].as_f64(),
        });
    }

    let (neck, left_shoulder, right_shoulder) = rest_anchors(body);
    let out_x = Vec3::new(T::one(), T::zero(), T::zero());

    let (r_sh, r_fore, r_palm) = right_chain_rotations(
        frame.get(JointSlot::RightShoulderAzimuth),
        frame.get(JointSlot::RightShoulderElevation),
        frame.get(JointSlot::RightShoulderRoll),
        frame.get(JointSlot::RightElbow),
        frame.get(JointSlot::RightWrist),
    );
    let right_elbow = right_shoulder + (r_sh * out_x) * body.upper_arm_len;
    let right_wrist = right_elbow + (r_fore * out_x) * body.forearm_len;

    let (l_sh_m, l_fore_m, l_palm_m) = right_chain_rotations(
        -frame.get(JointSlot::LeftShoulderAzimuth),
        frame.get(JointSlot::LeftShoulderElevation),
        frame.get(JointSlot::LeftShoulderRoll),
        frame.get(JointSlot::LeftElbow),
        frame.get(JointSlot::LeftWrist),
    );
    let l_sh = l_sh_m.mirror_conjugate_x();
    let l_fore = l_fore_m.mirror_conjugate_x();
    let l_palm = l_palm_m.mirror_conjugate_x();
    let left_elbow = left_shoulder + (l_sh * (-out_x)) * body.upper_arm_len;
    let left_wrist = left_elbow + (l_fore * (-out_x)) * body.forearm_len;

    // Neck: yaw about the vertical axis, then pitch about x.
    let neck_rot = Mat3::rot_y(-deg_to_rad(frame.get(JointSlot::NeckYaw)))
        * Mat3::rot_x(deg_to_rad(frame.get(JointSlot::NeckPitch)));

    Ok(FkPose {
        neck,
        left_shoulder,
        right_shoulder,
        left_elbow,
        right_elbow,
        left_wrist,
        right_wrist,
        neck_rot,
        left_upper_rot: l_sh,
        right_upper_rot: r_sh,
        left_fore_rot: l_fore,
        right_fore_rot: r_fore,
        left_palm_rot: l_palm,
        right_palm_rot: r_palm,
    })
}
