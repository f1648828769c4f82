//! Forward renderer: given body parameters and a known pose, rasterize the
//! silhouette frame an orthographic camera would see. This is the ground
//! truth generator the inverse pipeline is tested against, so it shares the
//! kinematic chain and all geometric conventions with [`crate::skeleton`].
//!
//! The figure is painted back to front: background, torso rectangle at the
//! clothing intensity, neck and head at the skin intensity, then each arm
//! as two capsules (stadium shapes) of width `arm_width` at the skin
//! intensity. Arms paint over the torso, so a hand in front of the chest
//! self-occludes exactly the way the detector has to cope with.

use thiserror::Error;

use crate::frame::Frame;
use crate::math::{point_segment_distance, Vec2, Vec3};
use crate::num::Real;
use crate::pose3d::{JointAngleFrame, JointLimits, JointSlot};
use crate::skeleton::{forward_kinematics, FkPose, SkeletonError};

/// Shoulder span as a fraction of the torso (body) width. The renderer
/// sizes the torso from it and the calibrator inverts it, so both sides of
/// the pipeline share the one constant.
pub const SHOULDER_TO_BODY_WIDTH_RATIO: f64 = 0.8;

/// Upper arm as a fraction of the full shoulder-to-wrist arm length.
/// Calibration cannot see the elbow in the spread-arm pose, so it splits
/// the measured arm length with this ratio.
pub const UPPER_ARM_RATIO: f64 = 0.55;

/// Clearance between the chin and the torso top, in head radii.
pub const HEAD_GAP_RATIO: f64 = 0.55;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid body parameters: {0}")]
    BadBody(&'static str),
    #[error("pose outside joint limits: {0}")]
    PoseOutOfLimits(#[from] SkeletonError),
    #[error("figure does not fit a {width}x{height} frame (exceeds at {what})")]
    DoesNotFit {
        width: u32,
        height: u32,
        what: &'static str,
    },
    #[error("angle script line {line}: {msg}")]
    Script { line: usize, msg: String },
}

/// Per-user body geometry (pixels at the calibrated camera scale) and the
/// three intensity classes of the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyParams<T = crate::Scalar> {
    pub shoulder_width: T,
    pub torso_height: T,
    /// Row of the torso top; the shoulders sit on this row.
    pub torso_top: T,
    pub body_center_x: T,
    pub upper_arm_len: T,
    pub forearm_len: T,
    /// Full limb thickness (capsule diameter).
    pub arm_width: T,
    pub head_radius: T,
    pub skin_intensity: u8,
    pub clothing_intensity: u8,
    pub background_intensity: u8,
}

impl<T: Real> Default for BodyParams<T> {
    /// A 640x480-friendly figure.
    fn default() -> Self {
        Self {
            shoulder_width: T::of(96.0),
            torso_height: T::of(230.0),
            torso_top: T::of(170.0),
            body_center_x: T::of(320.0),
            upper_arm_len: T::of(88.0),
            forearm_len: T::of(72.0),
            arm_width: T::of(18.0),
            head_radius: T::of(22.0),
            skin_intensity: 205,
            clothing_intensity: 95,
            background_intensity: 18,
        }
    }
}

impl<T: Real> BodyParams<T> {
    /// The skin band and the clothing must sit at least 40 levels apart and
    /// the background must be darker than both by the same margin.
    pub fn validate(&self) -> Result<(), SynthError> {
        let skin = self.skin_intensity as i32;
        let cloth = self.clothing_intensity as i32;
        let bg = self.background_intensity as i32;
        if (skin - cloth).abs() < 40 {
            return Err(SynthError::BadBody("skin/clothing contrast under 40 levels"));
        }
        if bg >= skin.min(cloth) - 40 {
            return Err(SynthError::BadBody("background not 40 levels darker"));
        }
        for (v, name) in [
            (self.shoulder_width, "shoulder_width"),
            (self.torso_height, "torso_height"),
            (self.upper_arm_len, "upper_arm_len"),
            (self.forearm_len, "forearm_len"),
            (self.arm_width, "arm_width"),
            (self.head_radius, "head_radius"),
        ] {
            if v <= T::zero() {
                let _ = name;
                return Err(SynthError::BadBody("all lengths must be positive"));
            }
        }
        Ok(())
    }

    /// Torso rectangle width implied by the shoulder span.
    pub fn torso_width(&self) -> T {
        self.shoulder_width / T::of(SHOULDER_TO_BODY_WIDTH_RATIO)
    }

    pub fn arm_len(&self) -> T {
        self.upper_arm_len + self.forearm_len
    }

    pub fn head_center(&self) -> Vec2<T> {
        Vec2::new(
            self.body_center_x,
            self.torso_top - self.head_radius * T::of(1.0 + HEAD_GAP_RATIO),
        )
    }

    pub fn neck_half_width(&self) -> T {
        self.head_radius * T::of(0.4)
    }
}

/// One arm's commanded angles, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmAngles<T = crate::Scalar> {
    pub azimuth: T,
    pub elevation: T,
    pub roll: T,
    pub elbow_flexion: T,
    pub wrist_flexion: T,
}

/// A known pose driving the renderer, plus the occlusion the scene is
/// expected to exhibit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthPose<T = crate::Scalar> {
    pub left: ArmAngles<T>,
    pub right: ArmAngles<T>,
    pub expect_left_occluded: bool,
    pub expect_right_occluded: bool,
}

impl<T: Real> Default for GroundTruthPose<T> {
    fn default() -> Self {
        Self::t_pose()
    }
}

impl<T: Real> GroundTruthPose<T> {
    /// Arms straight out in the image plane: the calibration pose.
    pub fn t_pose() -> Self {
        Self {
            left: ArmAngles::default(),
            right: ArmAngles::default(),
            expect_left_occluded: false,
            expect_right_occluded: false,
        }
    }

    pub fn to_joint_frame(&self) -> JointAngleFrame<T> {
        let mut f = JointAngleFrame::zero();
        f.set(JointSlot::LeftShoulderAzimuth, self.left.azimuth);
        f.set(JointSlot::LeftShoulderElevation, self.left.elevation);
        f.set(JointSlot::LeftShoulderRoll, self.left.roll);
        f.set(JointSlot::LeftElbow, self.left.elbow_flexion);
        f.set(JointSlot::LeftWrist, self.left.wrist_flexion);
        f.set(JointSlot::RightShoulderAzimuth, self.right.azimuth);
        f.set(JointSlot::RightShoulderElevation, self.right.elevation);
        f.set(JointSlot::RightShoulderRoll, self.right.roll);
        f.set(JointSlot::RightElbow, self.right.elbow_flexion);
        f.set(JointSlot::RightWrist, self.right.wrist_flexion);
        f.left_occluded = self.expect_left_occluded;
        f.right_occluded = self.expect_right_occluded;
        f
    }

    /// Mirror pose: arms swapped, azimuths negated.
    pub fn mirrored(&self) -> Self {
        let flip = |a: ArmAngles<T>| ArmAngles {
            azimuth: -a.azimuth,
            ..a
        };
        Self {
            left: flip(self.right),
            right: flip(self.left),
            expect_left_occluded: self.expect_right_occluded,
            expect_right_occluded: self.expect_left_occluded,
        }
    }
}

/// Additive Gaussian pixel noise; sigma 0 disables it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            seed: 0x5EED,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

/// Small deterministic PRNG (splitmix64). Its streams are part of the test
/// oracle contract: the same seed always produces the same frame bytes.
#[derive(Debug, Clone)]
pub struct DeterministicRng {
    state: u64,
    spare_gauss: Option<f64>,
}

impl DeterministicRng {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_gauss: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gauss.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_gauss = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Axis-aligned float box used for framing checks and raster bounds.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Bounds {
    fn of_points(points: &[(f64, f64)], margin: f64) -> Self {
        let mut b = Bounds {
            x0: f64::INFINITY,
            y0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for &(x, y) in points {
            b.x0 = b.x0.min(x - margin);
            b.y0 = b.y0.min(y - margin);
            b.x1 = b.x1.max(x + margin);
            b.y1 = b.y1.max(y + margin);
        }
        b
    }

    fn fits(&self, width: u32, height: u32) -> bool {
        self.x0 >= 0.0
            && self.y0 >= 0.0
            && self.x1 <= (width - 1) as f64
            && self.y1 <= (height - 1) as f64
    }
}

struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Raster {
    fn paint(&mut self, b: Bounds, value: u8, mut inside: impl FnMut(f64, f64) -> bool) {
        let x0 = b.x0.ceil().max(0.0) as u32;
        let x1 = (b.x1.floor().min((self.width - 1) as f64)).max(0.0) as u32;
        let y0 = b.y0.ceil().max(0.0) as u32;
        let y1 = (b.y1.floor().min((self.height - 1) as f64)).max(0.0) as u32;
        if b.x1 < 0.0 || b.y1 < 0.0 {
            return;
        }
        for y in y0..=y1 {
            let row = y as usize * self.width as usize;
            for x in x0..=x1 {
                if inside(x as f64, y as f64) {
                    self.data[row + x as usize] = value;
                }
            }
        }
    }
}

/// The four capsule endpoints of both arms, projected.
fn arm_segments<T: Real>(fk: &FkPose<T>) -> [(Vec2<f64>, Vec2<f64>); 4] {
    let p = |v: Vec3<T>| Vec2::new(v.x.as_f64(), v.y.as_f64());
    [
        (p(fk.left_shoulder), p(fk.left_elbow)),
        (p(fk.left_elbow), p(fk.left_wrist)),
        (p(fk.right_shoulder), p(fk.right_elbow)),
        (p(fk.right_elbow), p(fk.right_wrist)),
    ]
}

/// Rasterize the silhouette the camera would see for a known pose.
pub fn render_silhouette<T: Real>(
    body: &BodyParams<T>,
    pose: &GroundTruthPose<T>,
    width: u32,
    height: u32,
    noise: NoiseConfig,
) -> Result<Frame, SynthError> {
    body.validate()?;
    let limits = JointLimits::default();
    let fk = forward_kinematics(&pose.to_joint_frame(), body, &limits)?;

    let cx = body.body_center_x.as_f64();
    let tt = body.torso_top.as_f64();
    let torso_half = body.torso_width().as_f64() / 2.0;
    let torso_bottom = tt + body.torso_height.as_f64();
    let head = body.head_center();
    let (hx, hy) = (head.x.as_f64(), head.y.as_f64());
    let hr = body.head_radius.as_f64();
    let neck_hw = body.neck_half_width().as_f64();
    let r = body.arm_width.as_f64() / 2.0;

    let torso = Bounds {
        x0: cx - torso_half,
        y0: tt,
        x1: cx + torso_half,
        y1: torso_bottom,
    };
    let head_b = Bounds::of_points(&[(hx, hy)], hr);
    let segments = arm_segments(&fk);
    for (what, b) in [("torso", torso), ("head", head_b)] {
        if !b.fits(width, height) {
            return Err(SynthError::DoesNotFit {
                width,
                height,
                what,
            });
        }
    }
    for (a, b) in &segments {
        let bb = Bounds::of_points(&[(a.x, a.y), (b.x, b.y)], r);
        if !bb.fits(width, height) {
            return Err(SynthError::DoesNotFit {
                width,
                height,
                what: "arm",
            });
        }
    }

    let mut raster = Raster {
        width,
        height,
        data: vec![body.background_intensity; width as usize * height as usize],
    };

    // Painter's order: torso, neck, head, then arms over everything.
    raster.paint(torso, body.clothing_intensity, |x, y| {
        (x - cx).abs() <= torso_half && y >= tt && y <= torso_bottom
    });
    let neck = Bounds {
        x0: cx - neck_hw,
        y0: hy,
        x1: cx + neck_hw,
        y1: tt,
    };
    raster.paint(neck, body.skin_intensity, |x, _| (x - cx).abs() <= neck_hw);
    raster.paint(head_b, body.skin_intensity, |x, y| {
        let (dx, dy) = (x - hx, y - hy);
        dx * dx + dy * dy <= hr * hr
    });
    for (a, b) in &segments {
        let bb = Bounds::of_points(&[(a.x, a.y), (b.x, b.y)], r);
        raster.paint(bb, body.skin_intensity, |x, y| {
            point_segment_distance(Vec2::new(x, y), *a, *b) <= r
        });
    }

    if noise.sigma > 0.0 {
        let mut rng = DeterministicRng::new(noise.seed);
        for v in &mut raster.data {
            let n = (*v as f64 + rng.gaussian() * noise.sigma).round();
            *v = n.clamp(0.0, 255.0) as u8;
        }
    }

    Ok(Frame::new(width, height, raster.data).expect("raster dimensions are consistent"))
}

/// Ground-truth 2D joint positions of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTruth<T = crate::Scalar> {
    pub shoulder: Vec2<T>,
    pub elbow: Vec2<T>,
    pub wrist: Vec2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthKeypoints<T = crate::Scalar> {
    pub left: ArmTruth<T>,
    pub right: ArmTruth<T>,
    pub left_occluded: bool,
    pub right_occluded: bool,
}

/// Orthographic projection of the forward-kinematics joints, using the same
/// conventions as the renderer.
pub fn project_keypoints<T: Real>(
    body: &BodyParams<T>,
    pose: &GroundTruthPose<T>,
) -> Result<TruthKeypoints<T>, SynthError> {
    body.validate()?;
    let fk = forward_kinematics(&pose.to_joint_frame(), body, &JointLimits::default())?;
    Ok(TruthKeypoints {
        left: ArmTruth {
            shoulder: fk.left_shoulder.xy(),
            elbow: fk.left_elbow.xy(),
            wrist: fk.left_wrist.xy(),
        },
        right: ArmTruth {
            shoulder: fk.right_shoulder.xy(),
            elbow: fk.right_elbow.xy(),
            wrist: fk.right_wrist.xy(),
        },
        left_occluded: pose.expect_left_occluded,
        right_occluded: pose.expect_right_occluded,
    })
}

/// Expected per-arm occlusion for a pose: the hand counts as occluding
/// when its wrist projects onto the torso rectangle.
pub fn expected_occlusion<T: Real>(
    body: &BodyParams<T>,
    pose: &GroundTruthPose<T>,
) -> Result<(bool, bool), SynthError> {
    let k = project_keypoints(body, pose)?;
    let half = body.torso_width() / T::of(2.0);
    let over = |w: Vec2<T>| {
        (w.x - body.body_center_x).abs() <= half && w.y >= body.torso_top
    };
    Ok((over(k.left.wrist), over(k.right.wrist)))
}

/// Full 3D ground-truth joints (camera frame, shoulder depth zero).
pub fn truth_fk<T: Real>(
    body: &BodyParams<T>,
    pose: &GroundTruthPose<T>,
) -> Result<FkPose<T>, SynthError> {
    body.validate()?;
    Ok(forward_kinematics(
        &pose.to_joint_frame(),
        body,
        &JointLimits::default(),
    )?)
}

// ---------------------------------------------------------------------------
// Angle script: the plain-text frame-per-line pose format of the synth CLI.
// ---------------------------------------------------------------------------

pub const SCRIPT_COLUMNS: [&str; 10] = [
    "l_az", "l_el", "l_roll", "l_elbow", "l_wrist", "r_az", "r_el", "r_roll", "r_elbow", "r_wrist",
];

/// Parse an angle script: one frame per line, ten arm angles in degrees in
/// [`SCRIPT_COLUMNS`] order, `#` starts a comment, blank lines are skipped.
pub fn parse_angle_script(text: &str) -> Result<Vec<GroundTruthPose<f64>>, SynthError> {
    let mut poses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<f64> = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| SynthError::Script {
                    line,
                    msg: format!("'{t}' is not a number"),
                })
            })
            .collect::<Result<_, _>>()?;
        if fields.len() != 10 {
            return Err(SynthError::Script {
                line,
                msg: format!("expected 10 angles, found {}", fields.len()),
            });
        }
        let arm = |f: &[f64]| ArmAngles {
            azimuth: f[0],
            elevation: f[1],
            roll: f[2],
            elbow_flexion: f[3],
            wrist_flexion: f[4],
        };
        let mut pose = GroundTruthPose {
            left: arm(&fields[0..5]),
            right: arm(&fields[5..10]),
            expect_left_occluded: false,
            expect_right_occluded: false,
        };
        let frame = pose.to_joint_frame();
        if let Some(slot) = JointLimits::default().violation(&frame) {
            return Err(SynthError::Script {
                line,
                msg: format!(
                    "{} = {} degrees is outside its joint limit",
                    crate::pose3d::SLOT_NAMES[slot],
                    frame.slots[slot]
                ),
            });
        }
        pose.expect_left_occluded = false;
        pose.expect_right_occluded = false;
        poses.push(pose);
    }
    Ok(poses)
}

/// Format one script line from a pose.
pub fn script_line(pose: &GroundTruthPose<f64>) -> String {
    let a = &pose.left;
    let b = &pose.right;
    format!(
        "{:.3} {:.3} {:.3} {:.3} {:.3} {:.3} {:.3} {:.3} {:.3} {:.3}",
        a.azimuth,
        a.elevation,
        a.roll,
        a.elbow_flexion,
        a.wrist_flexion,
        b.azimuth,
        b.elevation,
        b.roll,
        b.elbow_flexion,
        b.wrist_flexion
    )
}

/// Header for the ground-truth keypoint CSV written next to a synthetic
/// sequence.
pub fn truth_csv_header() -> String {
    "frame,l_shoulder_x,l_shoulder_y,l_elbow_x,l_elbow_y,l_wrist_x,l_wrist_y,\
     r_shoulder_x,r_shoulder_y,r_elbow_x,r_elbow_y,r_wrist_x,r_wrist_y,l_occluded,r_occluded"
        .replace(' ', "")
}

pub fn truth_csv_row(frame_index: usize, truth: &TruthKeypoints<f64>) -> String {
    let p = |v: Vec2<f64>| format!("{:.3},{:.3}", v.x, v.y);
    format!(
        "{},{},{},{},{},{},{},{},{}",
        frame_index,
        p(truth.left.shoulder),
        p(truth.left.elbow),
        p(truth.left.wrist),
        p(truth.right.shoulder),
        p(truth.right.elbow),
        p(truth.right.wrist),
        u8::from(truth.left_occluded),
        u8::from(truth.right_occluded),
    )
}

// ---------------------------------------------------------------------------
// Pose samplers for the oracle suites.
// ---------------------------------------------------------------------------

/// Frame size + margins context for sampling poses that the detector is
/// contractually expected to handle.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpace {
    pub width: u32,
    pub height: u32,
    /// Cap on the out-of-plane angle of each lifted segment, degrees.
    pub max_out_of_plane_deg: f64,
}

impl Default for SampleSpace {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            max_out_of_plane_deg: 68.0,
        }
    }
}

fn seg_out_of_plane(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return 90.0;
    }
    (d.z.abs() / len).asin().to_degrees()
}

fn segment_min_distance(a0: Vec2<f64>, a1: Vec2<f64>, b0: Vec2<f64>, b1: Vec2<f64>) -> f64 {
    let mut best = f64::INFINITY;
    const STEPS: usize = 24;
    for i in 0..=STEPS {
        let t = i as f64 / STEPS as f64;
        let p = a0 + (a1 - a0) * t;
        best = best.min(point_segment_distance(p, b0, b1));
    }
    best
}

struct PoseGeometry {
    shoulder: Vec2<f64>,
    elbow: Vec2<f64>,
    wrist: Vec2<f64>,
    elbow3: Vec3<f64>,
    wrist3: Vec3<f64>,
    shoulder3: Vec3<f64>,
}

fn arm_geometry(fk: &FkPose<f64>, right: bool) -> PoseGeometry {
    if right {
        PoseGeometry {
            shoulder: fk.right_shoulder.xy(),
            elbow: fk.right_elbow.xy(),
            wrist: fk.right_wrist.xy(),
            shoulder3: fk.right_shoulder,
            elbow3: fk.right_elbow,
            wrist3: fk.right_wrist,
        }
    } else {
        PoseGeometry {
            shoulder: fk.left_shoulder.xy(),
            elbow: fk.left_elbow.xy(),
            wrist: fk.left_wrist.xy(),
            shoulder3: fk.left_shoulder,
            elbow3: fk.left_elbow,
            wrist3: fk.left_wrist,
        }
    }
}

/// True when the arm is a well-posed target for the extreme-point detector:
/// toward-camera depth, bounded foreshortening, hand clearly extremal and
/// clear of the torso, head and frame edges.
fn arm_is_clear(
    g: &PoseGeometry,
    body: &BodyParams<f64>,
    space: &SampleSpace,
    right: bool,
) -> bool {
    let aw = body.arm_width;
    let cx = body.body_center_x;
    let torso_half = body.torso_width() / 2.0;
    let head = body.head_center();
    let tt = body.torso_top;

    // Depth progresses toward the camera (the recoverable hemisphere).
    if g.elbow3.z - g.shoulder3.z < -1e-9 || g.wrist3.z - g.elbow3.z < -1e-9 {
        return false;
    }
    if seg_out_of_plane(g.shoulder3, g.elbow3) > space.max_out_of_plane_deg {
        return false;
    }
    if seg_out_of_plane(g.elbow3, g.wrist3) > space.max_out_of_plane_deg {
        return false;
    }
    // Projected segments keep usable length.
    if g.elbow.distance(g.shoulder) < 0.33 * body.upper_arm_len {
        return false;
    }
    if g.wrist.distance(g.elbow) < 0.33 * body.forearm_len {
        return false;
    }
    // The hand is the extremity the detector keys on.
    if g.wrist.distance(g.shoulder) < g.elbow.distance(g.shoulder) + 1.5 * aw {
        return false;
    }
    // Clearances, stricter than the detector's own margins: the fist tip
    // must escape the occlusion trigger (an arm width past the expanded
    // torso band) and the elbow must stay visible to the boundary search.
    let side = |p: Vec2<f64>| if right { p.x - cx } else { cx - p.x };
    let head_halfw = 0.3 * body.torso_width();
    let clear_of = |p: Vec2<f64>, side_margin: f64, top_margin: f64| {
        side(p) >= torso_half + side_margin || p.y <= tt - top_margin
    };
    if !clear_of(g.wrist, 2.5 * aw, 3.0 * aw) {
        return false;
    }
    if !clear_of(g.elbow, 1.25 * aw, 1.75 * aw) {
        return false;
    }
    for p in [g.elbow, g.wrist] {
        if side(p) < 0.75 * aw {
            return false;
        }
        if p.distance(head) < body.head_radius + 1.5 * aw {
            return false;
        }
        // Above the shoulders the head/neck column is off limits too.
        if p.y < tt && (p.x - cx).abs() < head_halfw + aw {
            return false;
        }
    }
    // In frame with capsule margin.
    let m = aw / 2.0 + 2.0;
    for p in [g.elbow, g.wrist] {
        if p.x < m || p.y < m || p.x > space.width as f64 - 1.0 - m || p.y > space.height as f64 - 1.0 - m
        {
            return false;
        }
    }
    true
}

/// Random arm angles biased toward the camera-facing hemisphere. Forward
/// azimuth is positive on the right arm and negative on the left.
fn random_arm(rng: &mut DeterministicRng, right: bool) -> ArmAngles<f64> {
    let forward = if right { 1.0 } else { -1.0 };
    ArmAngles {
        azimuth: forward * rng.range(0.0, 160.0),
        elevation: rng.range(-70.0, 70.0),
        roll: rng.range(-85.0, 85.0),
        elbow_flexion: rng.range(20.0, 100.0),
        wrist_flexion: 0.0,
    }
}

/// Draw a random in-limit, non-degenerate, occlusion-free pose.
pub fn sample_clear_pose(
    rng: &mut DeterministicRng,
    body: &BodyParams<f64>,
    space: &SampleSpace,
) -> GroundTruthPose<f64> {
    for _ in 0..20_000 {
        let pose = GroundTruthPose {
            left: random_arm(rng, false),
            right: random_arm(rng, true),
            expect_left_occluded: false,
            expect_right_occluded: false,
        };
        let Ok(fk) = truth_fk(body, &pose) else {
            continue;
        };
        let left = arm_geometry(&fk, false);
        let right = arm_geometry(&fk, true);
        if !arm_is_clear(&left, body, space, false) || !arm_is_clear(&right, body, space, true) {
            continue;
        }
        // Arms must not merge in the silhouette.
        let min_gap = 1.4 * body.arm_width;
        let mut ok = true;
        for (a0, a1) in [(left.shoulder, left.elbow), (left.elbow, left.wrist)] {
            for (b0, b1) in [(right.shoulder, right.elbow), (right.elbow, right.wrist)] {
                if segment_min_distance(a0, a1, b0, b1) < min_gap {
                    ok = false;
                }
            }
        }
        if ok {
            return pose;
        }
    }
    panic!("pose sampler failed to find a clear pose; body/space are inconsistent");
}

/// Draw a pose with the given hand over the chest (the self-occlusion
/// scenario) and the other arm clear.
pub fn sample_occluded_pose(
    rng: &mut DeterministicRng,
    body: &BodyParams<f64>,
    space: &SampleSpace,
    right_hand: bool,
) -> GroundTruthPose<f64> {
    let cx = body.body_center_x;
    let tt = body.torso_top;
    let th = body.torso_height;
    let torso_half = body.torso_width() / 2.0;
    let aw = body.arm_width;

    let occ_forward = if right_hand { 1.0 } else { -1.0 };
    for _ in 0..200_000 {
        let occluding = ArmAngles {
            azimuth: occ_forward * rng.range(35.0, 120.0),
            elevation: rng.range(-65.0, 25.0),
            roll: rng.range(-90.0, 90.0),
            elbow_flexion: rng.range(55.0, 150.0),
            wrist_flexion: 0.0,
        };
        // The clear arm stays spread, biased safely away from the torso.
        let clear = ArmAngles {
            azimuth: -occ_forward * rng.range(0.0, 45.0),
            elevation: rng.range(-45.0, 60.0),
            roll: rng.range(-60.0, 60.0),
            elbow_flexion: rng.range(20.0, 70.0),
            wrist_flexion: 0.0,
        };
        let pose = GroundTruthPose {
            left: if right_hand { clear } else { occluding },
            right: if right_hand { occluding } else { clear },
            expect_left_occluded: !right_hand,
            expect_right_occluded: right_hand,
        };
        let Ok(fk) = truth_fk(body, &pose) else {
            continue;
        };
        let occ = arm_geometry(&fk, right_hand);
        let free = arm_geometry(&fk, !right_hand);

        // Wrist parked over the chest, away from neck and torso edges.
        let wx = (occ.wrist.x - cx).abs();
        if wx > 0.45 * torso_half {
            continue;
        }
        if occ.wrist.y < tt + 0.22 * th || occ.wrist.y > tt + 0.62 * th {
            continue;
        }
        // Elbow hugs the body: inside the band expanded by under one
        // arm-width, which is what flips the detector's occlusion branch.
        let eside = if right_hand {
            occ.elbow.x - cx
        } else {
            cx - occ.elbow.x
        };
        if eside > torso_half + 0.85 * aw {
            continue;
        }
        if occ.elbow.y < tt + 0.5 * aw {
            continue;
        }
        if occ.elbow.distance(body.head_center()) < body.head_radius + 1.5 * aw {
            continue;
        }
        if occ.wrist.distance(body.head_center()) < body.head_radius + 2.0 * aw {
            continue;
        }
        // Hand should sit clear of its own entry strip so the skin blob has
        // a distinct distal end: require some forearm extent.
        if occ.wrist.distance(occ.elbow) < 0.45 * body.forearm_len {
            continue;
        }
        if !arm_is_clear(&free, body, space, !right_hand) {
            continue;
        }
        // Keep the two arms' capsules apart.
        let min_gap = 1.4 * aw;
        let mut ok = true;
        for (a0, a1) in [(occ.shoulder, occ.elbow), (occ.elbow, occ.wrist)] {
            for (b0, b1) in [(free.shoulder, free.elbow), (free.elbow, free.wrist)] {
                if segment_min_distance(a0, a1, b0, b1) < min_gap {
                    ok = false;
                }
            }
        }
        if ok {
            return pose;
        }
    }
    panic!("pose sampler failed to find an occluded pose; body/space are inconsistent");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body() -> BodyParams<f64> {
        BodyParams::default()
    }

    fn lit_columns(frame: &Frame, threshold: u8) -> (u32, u32) {
        let mut min_x = u32::MAX;
        let mut max_x = 0;
        for y in 0..frame.height() {
            for (x, &v) in frame.row(y).iter().enumerate() {
                if v > threshold {
                    min_x = min_x.min(x as u32);
                    max_x = max_x.max(x as u32);
                }
            }
        }
        (min_x, max_x)
    }

    #[test]
    fn t_pose_extent_is_span_plus_hand_caps() {
        let b = body();
        let f = render_silhouette(&b, &GroundTruthPose::t_pose(), 640, 480, NoiseConfig::disabled())
            .unwrap();
        let (min_x, max_x) = lit_columns(&f, 60);
        let extent = (max_x - min_x + 1) as f64;
        // Shoulder span plus both arms plus the rounded fist caps.
        let want = b.shoulder_width + 2.0 * (b.upper_arm_len + b.forearm_len) + b.arm_width;
        assert!(
            (extent - want).abs() <= 2.0,
            "extent {extent} vs expected {want}"
        );
    }

    #[test]
    fn straight_arm_silhouette_is_one_capsule() {
        let b = body();
        let mut pose = GroundTruthPose::t_pose();
        pose.right.elevation = 30.0;
        let frame =
            render_silhouette(&b, &pose, 640, 480, NoiseConfig::disabled()).unwrap();
        let truth = project_keypoints(&b, &pose).unwrap();
        // Every lit pixel right of the torso lies within the single
        // shoulder->wrist capsule, and the capsule interior is fully lit.
        let r = b.arm_width / 2.0;
        let band_right = b.body_center_x + b.torso_width() / 2.0 + 2.0;
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let p = Vec2::new(x as f64, y as f64);
                if p.x <= band_right {
                    continue;
                }
                let d = point_segment_distance(p, truth.right.shoulder, truth.right.wrist);
                let lit = frame.get(x, y) > 60;
                if d <= r - 1.0 {
                    assert!(lit, "interior pixel unlit at {x},{y}");
                }
                if d > r + 1.0 {
                    assert!(!lit, "exterior pixel lit at {x},{y}");
                }
            }
        }
    }

    #[test]
    fn arm_pointed_at_camera_projects_to_arm_width() {
        let b = body();
        let mut pose = GroundTruthPose::t_pose();
        pose.right.azimuth = 90.0; // upper arm straight at the camera
        pose.right.elbow_flexion = 0.0;
        let frame =
            render_silhouette(&b, &pose, 640, 480, NoiseConfig::disabled()).unwrap();
        // The whole right arm collapses onto the shoulder: measure the lit
        // extent beyond the torso band on the shoulder row.
        let truth = project_keypoints(&b, &pose).unwrap();
        assert!(truth.right.wrist.distance(truth.right.shoulder) < 1.0);
        // Only skin pixels count: the torso (clothing) also crosses this row.
        let y = b.torso_top as u32;
        let mut max_x = truth.right.shoulder.x;
        for x in (b.body_center_x as u32)..frame.width() {
            if frame.get(x, y) > 150 {
                max_x = max_x.max(x as f64);
            }
        }
        let extent = max_x - truth.right.shoulder.x;
        assert!(
            extent <= b.arm_width / 2.0 + 1.5,
            "foreshortened arm extends {extent}px past the shoulder"
        );
    }

    #[test]
    fn keypoints_match_plane_geometry() {
        let b = body();
        let t = project_keypoints(&b, &GroundTruthPose::t_pose()).unwrap();
        let reach = b.upper_arm_len + b.forearm_len;
        assert!((t.right.wrist.x - (t.right.shoulder.x + reach)).abs() < 1e-9);
        assert_eq!(t.right.wrist.y, t.right.shoulder.y);
        assert!((t.left.wrist.x - (t.left.shoulder.x - reach)).abs() < 1e-9);

        // 90 degree elbow with 90 roll folds the forearm upward in-plane.
        let mut pose = GroundTruthPose::t_pose();
        pose.right.elbow_flexion = 90.0;
        pose.right.roll = 90.0;
        let t = project_keypoints(&b, &pose).unwrap();
        let up = t.right.elbow + Vec2::new(0.0, -b.forearm_len);
        assert!(t.right.wrist.distance(up) < 1e-9);
    }

    #[test]
    fn mirror_pose_mirrors_keypoints_and_frame() {
        let mut b = body();
        b.body_center_x = 319.5; // mirror axis of a 640-wide frame
        let mut pose = GroundTruthPose::t_pose();
        pose.right.azimuth = 25.0;
        pose.right.elevation = 40.0;
        pose.right.roll = 30.0;
        pose.right.elbow_flexion = 60.0;
        pose.left.elevation = -35.0;
        pose.left.elbow_flexion = 45.0;

        let t = project_keypoints(&b, &pose).unwrap();
        let tm = project_keypoints(&b, &pose.mirrored()).unwrap();
        let mx = |p: Vec2<f64>| Vec2::new(2.0 * b.body_center_x - p.x, p.y);
        assert!(tm.left.wrist.distance(mx(t.right.wrist)) < 1e-9);
        assert!(tm.right.elbow.distance(mx(t.left.elbow)) < 1e-9);

        let f = render_silhouette(&b, &pose, 640, 480, NoiseConfig::disabled()).unwrap();
        let fm = render_silhouette(&b, &pose.mirrored(), 640, 480, NoiseConfig::disabled())
            .unwrap();
        assert_eq!(f.mirrored(), fm);
    }

    #[test]
    fn keypoints_lie_inside_their_silhouette() {
        let b = body();
        let space = SampleSpace::default();
        let mut rng = DeterministicRng::new(7);
        for _ in 0..25 {
            let pose = sample_clear_pose(&mut rng, &b, &space);
            let frame =
                render_silhouette(&b, &pose, 640, 480, NoiseConfig::disabled()).unwrap();
            let t = project_keypoints(&b, &pose).unwrap();
            for p in [
                t.left.shoulder,
                t.left.elbow,
                t.left.wrist,
                t.right.shoulder,
                t.right.elbow,
                t.right.wrist,
            ] {
                let v = frame.get(p.x.round() as u32, p.y.round() as u32);
                assert!(
                    v > b.background_intensity + 20,
                    "keypoint {p:?} over background"
                );
            }
        }
    }

    #[test]
    fn rendering_is_deterministic_per_seed() {
        let b = body();
        let pose = GroundTruthPose::t_pose();
        let noise = NoiseConfig {
            sigma: 2.0,
            seed: 99,
        };
        let f1 = render_silhouette(&b, &pose, 640, 480, noise).unwrap();
        let f2 = render_silhouette(&b, &pose, 640, 480, noise).unwrap();
        assert_eq!(f1, f2);
        let f3 = render_silhouette(&b, &pose, 640, 480, NoiseConfig { sigma: 2.0, seed: 100 })
            .unwrap();
        assert_ne!(f1, f3);
    }

    #[test]
    fn figure_must_fit_frame() {
        let b = body();
        let err = render_silhouette(&b, &GroundTruthPose::t_pose(), 320, 240, NoiseConfig::disabled())
            .unwrap_err();
        assert!(matches!(err, SynthError::DoesNotFit { .. }));
    }

    #[test]
    fn out_of_limit_pose_is_rejected() {
        let b = body();
        let mut pose = GroundTruthPose::t_pose();
        pose.right.elbow_flexion = 170.0;
        assert!(matches!(
            render_silhouette(&b, &pose, 640, 480, NoiseConfig::disabled()),
            Err(SynthError::PoseOutOfLimits(_))
        ));
    }

    #[test]
    fn body_invariants_are_enforced() {
        let mut b = body();
        b.clothing_intensity = 190;
        assert!(b.validate().is_err());
        let mut b = body();
        b.background_intensity = 80;
        assert!(b.validate().is_err());
        let mut b = body();
        b.arm_width = 0.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn script_roundtrip_and_errors() {
        let text = "# comment\n0 0 0 0 0 0 0 0 0 0\n10 20 -30 40 5 -15 25 35 45 0 # inline\n";
        let poses = parse_angle_script(text).unwrap();
        assert_eq!(poses.len(), 2);
        assert_eq!(poses[1].right.elbow_flexion, 45.0);
        let back = parse_angle_script(&script_line(&poses[1])).unwrap();
        assert_eq!(back[0], poses[1]);

        let err = parse_angle_script("0 0 0 0 0 0 0 0 0\n").unwrap_err();
        assert!(matches!(err, SynthError::Script { line: 1, .. }));
        let err = parse_angle_script("\n\n0 0 0 200 0 0 0 0 0 0\n").unwrap_err();
        match err {
            SynthError::Script { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("l_elbow"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn samplers_produce_expected_scenes() {
        let b = body();
        let space = SampleSpace::default();
        let mut rng = DeterministicRng::new(3);
        for _ in 0..5 {
            let pose = sample_occluded_pose(&mut rng, &b, &space, true);
            assert!(pose.expect_right_occluded);
            let t = project_keypoints(&b, &pose).unwrap();
            let band = b.torso_width() / 2.0;
            assert!((t.right.wrist.x - b.body_center_x).abs() < band);
            assert!(t.right.wrist.y > b.torso_top);
            // renders without framing errors
            render_silhouette(&b, &pose, 640, 480, NoiseConfig::default()).unwrap();
        }
    }
}
