//! Frustum-primitive triangle meshing and rigid-part posing.
//!
//! Every solid of the dancer is a stack of truncated cones with elliptical
//! cross-sections; resolution is set per part so the default build lands on
//! the fixed polygon budget (head 400, upper arms 350, forearms 250, palms
//! 100, body/dress 350 triangles).

use crate::math::{Mat3, Vec3};
use crate::num::Real;
use crate::pose3d::{JointAngleFrame, JointLimits};
use crate::synth::BodyParams;

use super::{forward_kinematics, rest_anchors, SkeletonError};

/// Truncated cone with elliptical ends. An end with both semi-axes zero is
/// a point (cone apex); at most one end may be degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrustumPrimitive<T> {
    /// Bottom ellipse semi-axes (x, z) in model units.
    pub bottom: (T, T),
    /// Top ellipse semi-axes (x, z).
    pub top: (T, T),
    /// Axis length along local +y.
    pub height: T,
    pub segments: u32,
    pub stacks: u32,
}

/// Mesh part labels, also the OBJ group names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BodyPart {
    Head,
    UpperArmLeft,
    UpperArmRight,
    ForearmLeft,
    ForearmRight,
    PalmLeft,
    PalmRight,
    BodyDress,
}

impl BodyPart {
    pub const ALL: [BodyPart; 8] = [
        BodyPart::Head,
        BodyPart::UpperArmLeft,
        BodyPart::UpperArmRight,
        BodyPart::ForearmLeft,
        BodyPart::ForearmRight,
        BodyPart::PalmLeft,
        BodyPart::PalmRight,
        BodyPart::BodyDress,
    ];

    pub fn group_name(self) -> &'static str {
        match self {
            BodyPart::Head => "head",
            BodyPart::UpperArmLeft => "upper_arm_l",
            BodyPart::UpperArmRight => "upper_arm_r",
            BodyPart::ForearmLeft => "forearm_l",
            BodyPart::ForearmRight => "forearm_r",
            BodyPart::PalmLeft => "palm_l",
            BodyPart::PalmRight => "palm_r",
            BodyPart::BodyDress => "body_dress",
        }
    }

    /// Budget category: left/right instances share one polygon budget.
    pub fn category(self) -> PartCategory {
        match self {
            BodyPart::Head => PartCategory::Head,
            BodyPart::UpperArmLeft | BodyPart::UpperArmRight => PartCategory::UpperArm,
            BodyPart::ForearmLeft | BodyPart::ForearmRight => PartCategory::Forearm,
            BodyPart::PalmLeft | BodyPart::PalmRight => PartCategory::Palm,
            BodyPart::BodyDress => PartCategory::BodyDress,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartCategory {
    Head,
    UpperArm,
    Forearm,
    Palm,
    BodyDress,
}

/// Indexed triangle mesh with a part label per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T = crate::Scalar> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub parts: Vec<BodyPart>,
    pub uv: Option<Vec<[T; 2]>>,
}

impl<T: Real> TriMesh<T> {
    pub fn new(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[u32; 3]>,
        parts: Vec<BodyPart>,
        uv: Option<Vec<[T; 2]>>,
    ) -> Result<Self, SkeletonError> {
        if parts.len() != triangles.len() {
            return Err(SkeletonError::BadFrustum("one part label per triangle"));
        }
        if let Some(uv) = &uv {
            if uv.len() != vertices.len() {
                return Err(SkeletonError::BadFrustum("one uv per vertex"));
            }
        }
        let n = vertices.len() as u32;
        for t in &triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(SkeletonError::BadFrustum("triangle index out of range"));
            }
            let [a, b, c] = [
                vertices[t[0] as usize],
                vertices[t[1] as usize],
                vertices[t[2] as usize],
            ];
            if (b - a).cross(c - a).norm() == T::zero() {
                return Err(SkeletonError::BadFrustum("zero-area triangle"));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            parts,
            uv,
        })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn part_triangle_count(&self, category: PartCategory) -> usize {
        self.parts.iter().filter(|p| p.category() == category).count()
    }

    /// Append `other`, relabeling all its triangles as `part`.
    fn append_as(&mut self, other: TriMesh<T>, part: BodyPart) {
        let base = self.vertices.len() as u32;
        self.vertices.extend(other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
        self.parts
            .extend(std::iter::repeat_n(part, other.triangles.len()));
        if let (Some(uv), Some(o)) = (self.uv.as_mut(), other.uv) {
            uv.extend(o);
        }
    }

    /// Part of each vertex, derived from the triangles that reference it.
    /// Parts never share vertices, so the assignment is unambiguous.
    fn vertex_parts(&self) -> Vec<BodyPart> {
        let mut parts = vec![BodyPart::BodyDress; self.vertices.len()];
        for (tri, part) in self.triangles.iter().zip(&self.parts) {
            for &i in tri {
                parts[i as usize] = *part;
            }
        }
        parts
    }

    /// Centroid of the vertices belonging to `part`.
    pub fn part_centroid(&self, part: BodyPart) -> Option<Vec3<T>> {
        let vparts = self.vertex_parts();
        let mut sum = Vec3::zero();
        let mut n = 0usize;
        for (v, p) in self.vertices.iter().zip(&vparts) {
            if *p == part {
                sum = sum + *v;
                n += 1;
            }
        }
        (n > 0).then(|| sum / T::of(n as f64))
    }
}

fn end_is_point<T: Real>(axes: (T, T)) -> Result<bool, SkeletonError> {
    let (a, b) = axes;
    if a < T::zero() || b < T::zero() {
        return Err(SkeletonError::BadFrustum("negative semi-axis"));
    }
    match (a == T::zero(), b == T::zero()) {
        (true, true) => Ok(true),
        (false, false) => Ok(false),
        _ => Err(SkeletonError::BadFrustum(
            "an end must be a full ellipse or a point",
        )),
    }
}

/// Triangulate the lateral surface of a frustum in its local frame
/// (bottom ring in the y=0 plane, axis along +y).
///
/// Ring vertices are shared between adjacent stacks; a degenerate end
/// collapses to a single apex vertex fanned by `segments` triangles.
pub fn frustum_mesh<T: Real>(p: &FrustumPrimitive<T>) -> Result<TriMesh<T>, SkeletonError> {
    if p.segments < 3 {
        return Err(SkeletonError::TooFewSegments(p.segments));
    }
    if p.stacks < 1 {
        return Err(SkeletonError::TooFewStacks(p.stacks));
    }
    if p.height <= T::zero() {
        return Err(SkeletonError::BadFrustum("height must be positive"));
    }
    let bottom_point = end_is_point(p.bottom)?;
    let top_point = end_is_point(p.top)?;
    if bottom_point && top_point {
        return Err(SkeletonError::BadFrustum("both ends degenerate"));
    }

    let s = p.segments as usize;
    let k = p.stacks as usize;
    let mut vertices = Vec::new();
    let mut uv = Vec::new();
    let mut ring_start = Vec::new(); // vertex index of each level; usize::MAX marks an apex

    for level in 0..=k {
        let t = T::of(level as f64 / k as f64);
        let a = p.bottom.0 + (p.top.0 - p.bottom.0) * t;
        let b = p.bottom.1 + (p.top.1 - p.bottom.1) * t;
        let y = p.height * t;
        let apex_here = (level == 0 && bottom_point) || (level == k && top_point);
        if apex_here {
            ring_start.push(usize::MAX);
            vertices.push(Vec3::new(T::zero(), y, T::zero()));
            uv.push([T::of(0.5), t]);
        } else {
            ring_start.push(vertices.len());
            for i in 0..s {
                let theta = T::of(2.0 * std::f64::consts::PI * i as f64 / s as f64);
                vertices.push(Vec3::new(a * theta.cos(), y, b * theta.sin()));
                uv.push([T::of(i as f64 / s as f64), t]);
            }
        }
    }

    // Apexes are pushed out of ring order; recover their vertex index.
    let level_vertex = |level: usize| -> usize {
        if ring_start[level] == usize::MAX {
            // apex: it is the single vertex at that level
            if level == 0 {
                0
            } else {
                vertices.len() - 1
            }
        } else {
            ring_start[level]
        }
    };

    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for level in 0..k {
        let lo_apex = ring_start[level] == usize::MAX;
        let hi_apex = ring_start[level + 1] == usize::MAX;
        for i in 0..s {
            let j = (i + 1) % s;
            match (lo_apex, hi_apex) {
                (false, false) => {
                    let a = (ring_start[level] + i) as u32;
                    let b = (ring_start[level] + j) as u32;
                    let c = (ring_start[level + 1] + j) as u32;
                    let d = (ring_start[level + 1] + i) as u32;
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                (false, true) => {
                    let a = (ring_start[level] + i) as u32;
                    let b = (ring_start[level] + j) as u32;
                    let apex = level_vertex(level + 1) as u32;
                    triangles.push([a, b, apex]);
                }
                (true, false) => {
                    let apex = level_vertex(level) as u32;
                    let c = (ring_start[level + 1] + j) as u32;
                    let d = (ring_start[level + 1] + i) as u32;
                    triangles.push([apex, c, d]);
                }
                (true, true) => unreachable!("both ends degenerate is rejected above"),
            }
        }
    }

    let parts = vec![BodyPart::BodyDress; triangles.len()];
    TriMesh::new(vertices, triangles, parts, Some(uv))
}

/// Side-surface triangle count of a frustum build: `2*segments*stacks`,
/// minus `segments` for a degenerate end whose band becomes a fan.
pub fn frustum_triangle_count(segments: u32, stacks: u32, degenerate_end: bool) -> usize {
    let s = segments as usize;
    let k = stacks as usize;
    if degenerate_end {
        2 * s * (k - 1) + s
    } else {
        2 * s * k
    }
}

/// Vertex count of a frustum build with welded rings.
pub fn frustum_vertex_count(segments: u32, stacks: u32, degenerate_end: bool) -> usize {
    let s = segments as usize;
    let k = stacks as usize;
    if degenerate_end {
        s * k + 1
    } else {
        s * (k + 1)
    }
}

struct Placement<T> {
    rot: Mat3<T>,
    offset: Vec3<T>,
}

impl<T: Real> Placement<T> {
    fn apply(&self, mesh: &mut TriMesh<T>) {
        for v in &mut mesh.vertices {
            *v = self.rot * *v + self.offset;
        }
    }
}

fn fr<T: Real>(
    bottom: (f64, f64),
    top: (f64, f64),
    height: T,
    segments: u32,
    stacks: u32,
) -> FrustumPrimitive<T> {
    FrustumPrimitive {
        bottom: (T::of(bottom.0), T::of(bottom.1)),
        top: (T::of(top.0), T::of(top.1)),
        height,
        segments,
        stacks,
    }
}

/// Build the rest-pose (T-pose) dancer mesh from the body parameters.
///
/// Resolution per part is fixed to meet the polygon budget; sizes scale
/// with the body. UVs are cylindrical per primitive so a dress pattern can
/// be mapped onto the torso front.
pub fn build_dancer_mesh<T: Real>(body: &BodyParams<T>) -> TriMesh<T> {
    let (neck, left_sh, right_sh) = rest_anchors(body);
    let sw = body.shoulder_width.as_f64();
    let aw = body.arm_width.as_f64();
    let hr = body.head_radius.as_f64();
    let ul = body.upper_arm_len;
    let fl = body.forearm_len;
    let palm_len = fl * T::of(PALM_LEN_RATIO);

    let mut mesh = TriMesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        parts: Vec::new(),
        uv: Some(Vec::new()),
    };

    // Torso and dress: one flaring frustum, 2*25*7 = 350 triangles.
    let mut torso = frustum_mesh(&fr(
        (0.52 * sw, 0.30 * sw),
        (0.75 * sw, 0.42 * sw),
        body.torso_height,
        25,
        7,
    ))
    .expect("torso frustum is valid");
    Placement {
        rot: Mat3::identity(),
        offset: neck,
    }
    .apply(&mut torso);
    mesh.append_as(torso, BodyPart::BodyDress);

    // Head: cranium (2*16*10 = 320) plus headgear (2*10*4 = 80) = 400.
    let head_center_y = body.head_center().y;
    let mut cranium = frustum_mesh(&fr(
        (0.75 * hr, 0.75 * hr),
        (0.55 * hr, 0.55 * hr),
        T::of(2.0 * hr),
        16,
        10,
    ))
    .expect("cranium frustum is valid");
    Placement {
        rot: Mat3::identity(),
        offset: Vec3::new(body.body_center_x, head_center_y - T::of(hr), T::zero()),
    }
    .apply(&mut cranium); // local +y is down: bottom ring at the crown
    mesh.append_as(cranium, BodyPart::Head);

    let mut headgear = frustum_mesh(&fr(
        (1.45 * hr, 1.45 * hr),
        (1.05 * hr, 1.05 * hr),
        T::of(0.9 * hr),
        10,
        4,
    ))
    .expect("headgear frustum is valid");
    Placement {
        rot: Mat3::identity(),
        offset: Vec3::new(
            body.body_center_x,
            head_center_y - T::of(1.9 * hr),
            T::zero(),
        ),
    }
    .apply(&mut headgear);
    mesh.append_as(headgear, BodyPart::Head);

    // Arms lie along +/-x in the rest pose; the canonical frustum axis is
    // +y, so rotate it onto the outward direction.
    let to_pos_x = Mat3::rot_z(T::of(-std::f64::consts::FRAC_PI_2));
    let to_neg_x = Mat3::rot_z(T::of(std::f64::consts::FRAC_PI_2));

    struct ArmPiece<'a, T> {
        part: BodyPart,
        anchor: Vec3<T>,
        rot: &'a Mat3<T>,
        length: T,
        radii: (f64, f64),
        segments: u32,
        stacks: u32,
    }
    let piece = |part, anchor, rot, length, radii, segments, stacks| ArmPiece {
        part,
        anchor,
        rot,
        length,
        radii,
        segments,
        stacks,
    };
    let arm_parts = [
        // Upper arms: 2*11*8 = 176 each, 352 for the pair.
        piece(BodyPart::UpperArmRight, right_sh, &to_pos_x, ul, (0.60 * aw, 0.48 * aw), 11, 8),
        piece(BodyPart::UpperArmLeft, left_sh, &to_neg_x, ul, (0.60 * aw, 0.48 * aw), 11, 8),
        // Forearms: 2*9*7 = 126 each, 252 for the pair.
        piece(
            BodyPart::ForearmRight,
            right_sh + Vec3::new(ul, T::zero(), T::zero()),
            &to_pos_x,
            fl,
            (0.48 * aw, 0.36 * aw),
            9,
            7,
        ),
        piece(
            BodyPart::ForearmLeft,
            left_sh - Vec3::new(ul, T::zero(), T::zero()),
            &to_neg_x,
            fl,
            (0.48 * aw, 0.36 * aw),
            9,
            7,
        ),
        // Palms: 2*5*5 = 50 each, 100 for the pair.
        piece(
            BodyPart::PalmRight,
            right_sh + Vec3::new(ul + fl, T::zero(), T::zero()),
            &to_pos_x,
            palm_len,
            (0.36 * aw, 0.18 * aw),
            5,
            5,
        ),
        piece(
            BodyPart::PalmLeft,
            left_sh - Vec3::new(ul + fl, T::zero(), T::zero()),
            &to_neg_x,
            palm_len,
            (0.36 * aw, 0.18 * aw),
            5,
            5,
        ),
    ];

    for p in arm_parts {
        let (r0, r1) = p.radii;
        let mut m = frustum_mesh(&fr((r0, r0), (r1, r1), p.length, p.segments, p.stacks))
            .expect("arm frustum is valid");
        Placement {
            rot: *p.rot,
            offset: p.anchor,
        }
        .apply(&mut m);
        mesh.append_as(m, p.part);
    }

    mesh
}

/// Palm length as a fraction of the forearm.
pub const PALM_LEN_RATIO: f64 = 0.35;

/// Rigidly transform each part of the rest mesh by its chain transform.
/// No skinning or blending: parts are rigid links.
pub fn pose_mesh<T: Real>(
    rest: &TriMesh<T>,
    frame: &JointAngleFrame<T>,
    body: &BodyParams<T>,
    limits: &JointLimits<T>,
) -> Result<TriMesh<T>, SkeletonError> {
    let fk = forward_kinematics(frame, body, limits)?;
    let (neck, left_sh, right_sh) = rest_anchors(body);
    let x = |d: T| Vec3::new(d, T::zero(), T::zero());
    let rest_elbow_r = right_sh + x(body.upper_arm_len);
    let rest_elbow_l = left_sh - x(body.upper_arm_len);
    let rest_wrist_r = right_sh + x(body.upper_arm_len + body.forearm_len);
    let rest_wrist_l = left_sh - x(body.upper_arm_len + body.forearm_len);

    let id = Mat3::identity();
    let transform_of = |part: BodyPart| -> (Mat3<T>, Vec3<T>, Vec3<T>) {
        match part {
            BodyPart::BodyDress => (id, Vec3::zero(), Vec3::zero()),
            BodyPart::Head => (fk.neck_rot, neck, neck),
            BodyPart::UpperArmRight => (fk.right_upper_rot, right_sh, right_sh),
            BodyPart::UpperArmLeft => (fk.left_upper_rot, left_sh, left_sh),
            BodyPart::ForearmRight => (fk.right_fore_rot, rest_elbow_r, fk.right_elbow),
            BodyPart::ForearmLeft => (fk.left_fore_rot, rest_elbow_l, fk.left_elbow),
            BodyPart::PalmRight => (fk.right_palm_rot, rest_wrist_r, fk.right_wrist),
            BodyPart::PalmLeft => (fk.left_palm_rot, rest_wrist_l, fk.left_wrist),
        }
    };

    let vparts = rest.vertex_parts();
    let mut posed = rest.clone();
    for (v, part) in posed.vertices.iter_mut().zip(&vparts) {
        let (rot, pivot_rest, pivot_world) = transform_of(*part);
        *v = pivot_world + rot * (*v - pivot_rest);
    }
    Ok(posed)
}
