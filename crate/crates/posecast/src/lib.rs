//! Capture-to-stream gesture toolkit: calibrate a silhouette against a dark
//! background, track shoulder/elbow/wrist keypoints with self-occlusion
//! handling, lift the arms to 3D by foreshortening, stream twelve joint
//! angles per frame on a 38-byte wire message, and replay the motion on an
//! articulated frustum-built dancer with OBJ export.
//!
//! A synthetic forward renderer ([`synth`]) produces silhouette frames with
//! known ground truth, so the whole inverse pipeline is verifiable end to
//! end without a camera.
//!
//! All geometric code is generic over the scalar type via [`num::Real`];
//! the pipeline itself runs at the [`Scalar`] alias below.

pub mod frame;
pub mod math;
pub mod num;
pub mod pgm;
pub mod pipeline;
pub mod pose3d;
pub mod skeleton;
pub mod synth;
pub mod vision;
pub mod wire;

/// Pipeline scalar type.
pub type Scalar = f64;
/// 2D image-plane point (pixels).
pub type Point2 = math::Vec2<Scalar>;
/// 3D camera-frame point (pixels; z toward the camera).
pub type Point3 = math::Vec3<Scalar>;

pub use frame::{histogram, Frame, FrameError, Hist256, Region};
pub use pgm::{read_pgm, write_pgm, PgmError};
pub use pose3d::{
    angles_from_pose, clamp_to_limits, lift_arm, lift_segment, ArmPose3D, ArmSide, ClampedSlots,
    DepthSign, JointAngleFrame, JointLimits, JointSlot, PoseError,
};
pub use skeleton::{
    build_dancer_mesh, export_obj, forward_kinematics, frustum_mesh, pose_mesh, BodyPart, FkPose,
    FrustumPrimitive, SkeletonError, TriMesh,
};
pub use synth::{
    project_keypoints, render_silhouette, BodyParams, GroundTruthPose, NoiseConfig, SynthError,
};
pub use pipeline::{TrackedFrame, Tracker, TrackerConfig};
pub use vision::{
    binarize, calibrate, detect_keypoints, dynamic_threshold, gaussian_smooth, skin_mask, Arm2D,
    ArmKeypoints2D, Calibration, DetectionBranch, Mask, VisionConfig, VisionError,
};
pub use wire::{
    crc16, decode, encode, serve_session, Decoded, Deframer, DeliveredFrame, PoseMessage,
    PoseSender, ReceiverSession, SessionStats, StatsSnapshot, WireError, MESSAGE_SIZE,
};
