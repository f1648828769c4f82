//! Per-frame keypoint extraction: extreme-point search, the straight-arm
//! line test, bent-arm elbow recovery and the skin-band occlusion branch.
//!
//! Flow per arm (left works on the half-plane left of the body center,
//! right mirrors it):
//!
//! 1. binarize the smoothed frame, keep the largest connected component;
//! 2. the extreme point E is the silhouette pixel farthest from the arm's
//!    shoulder, outside the torso/head regions;
//! 3. if the shoulder-to-tip chord stays inside the silhouette at roughly
//!    arm thickness, the arm is straight: the wrist sits half an arm width
//!    inside the fist tip, the elbow at the calibrated upper-arm length;
//! 4. otherwise the arm is bent and the elbow is the boundary point whose
//!    two segments best match the calibrated lengths;
//! 5. if no extreme point clears the torso region by more than an arm
//!    width, the hand is in front of the body: the wrist comes from the
//!    skin band over the torso, the elbow from the outermost silhouette
//!    tip.
//!
//! Every scan runs in a fixed order, so identical inputs give identical
//! outputs bit for bit.

use crate::frame::Frame;
use crate::math::{point_segment_distance, Vec2};
use crate::pose3d::ArmSide;
use crate::{Point2, Scalar};

use super::components::{connected_components, ComponentMap};
use super::smooth::gaussian_smooth;
use super::threshold::binarize;
use super::{skin_mask, Calibration, Mask, VisionConfig, VisionError};

/// Which rule produced an arm's keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionBranch {
    Straight,
    Bent,
    Occluded,
    /// Detection failed; keypoints carried over from the previous frame.
    Carried,
}

/// One arm's detected keypoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm2D {
    pub shoulder: Point2,
    pub elbow: Point2,
    pub wrist: Point2,
    pub occluded: bool,
    /// Fraction of line-test samples inside the silhouette, 0..1.
    pub confidence: Scalar,
    pub branch: DetectionBranch,
}

/// Both arms of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmKeypoints2D {
    pub left: Arm2D,
    pub right: Arm2D,
}

impl ArmKeypoints2D {
    pub fn arm(&self, side: ArmSide) -> &Arm2D {
        match side {
            ArmSide::Left => &self.left,
            ArmSide::Right => &self.right,
        }
    }
}

pub fn detect_keypoints(
    frame: &Frame,
    calib: &Calibration,
    prev: Option<&ArmKeypoints2D>,
) -> Result<ArmKeypoints2D, VisionError> {
    detect_keypoints_with(frame, calib, prev, &VisionConfig::default())
}

pub fn detect_keypoints_with(
    frame: &Frame,
    calib: &Calibration,
    prev: Option<&ArmKeypoints2D>,
    cfg: &VisionConfig,
) -> Result<ArmKeypoints2D, VisionError> {
    if frame.width() != calib.frame_width || frame.height() != calib.frame_height {
        return Err(VisionError::DimensionMismatch {
            got_w: frame.width(),
            got_h: frame.height(),
            want_w: calib.frame_width,
            want_h: calib.frame_height,
        });
    }

    let smoothed = gaussian_smooth(frame, cfg.smooth_sigma)?;
    let mask = binarize(&smoothed, calib.threshold);
    let comps = connected_components(&mask);
    let sil = comps
        .largest()
        .filter(|&l| comps.stats_of(l).size >= (calib.body_width * calib.body_width / 4.0) as usize)
        .ok_or(VisionError::SilhouetteMissing)?;

    let skin = skin_mask(frame, calib);
    let skin_comps = connected_components(&skin);
    let head_label = skin_comps.topmost();

    let scene = Scene {
        calib,
        cfg,
        comps: &comps,
        sil,
        skin: &skin,
        skin_comps: &skin_comps,
        head_label,
    };

    let left = detect_arm(&scene, ArmSide::Left, prev.map(|p| &p.left))?;
    let right = detect_arm(&scene, ArmSide::Right, prev.map(|p| &p.right))?;
    Ok(ArmKeypoints2D { left, right })
}

struct Scene<'a> {
    calib: &'a Calibration,
    cfg: &'a VisionConfig,
    comps: &'a ComponentMap,
    sil: u32,
    skin: &'a Mask,
    skin_comps: &'a ComponentMap,
    head_label: Option<u32>,
}

impl Scene<'_> {
    fn margin(&self) -> f64 {
        self.cfg.body_margin_ratio * self.calib.arm_width
    }

    fn band_half(&self) -> f64 {
        self.calib.body_width / 2.0 + self.margin()
    }

    /// Torso band plus the head/neck column above it: the region the
    /// extreme-point search must ignore.
    fn in_body_region(&self, x: f64, y: f64) -> bool {
        let cx = self.calib.body_center_x;
        let tt = self.calib.torso_top();
        if (x - cx).abs() <= self.band_half() && y >= tt - self.margin() {
            return true;
        }
        (x - cx).abs() <= self.cfg.head_col_ratio * self.calib.body_width && y < tt
    }

    fn in_half_plane(&self, side: ArmSide, x: f64) -> bool {
        match side {
            ArmSide::Left => x < self.calib.body_center_x,
            ArmSide::Right => x >= self.calib.body_center_x,
        }
    }

    /// Distance from a point to the expanded torso rectangle (zero inside).
    fn reach_past_torso(&self, p: Point2) -> f64 {
        let dx = ((p.x - self.calib.body_center_x).abs() - self.band_half()).max(0.0);
        let dy = ((self.calib.torso_top() - self.margin()) - p.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    #[inline]
    fn inside_sil(&self, p: Point2) -> bool {
        self.comps
            .is(p.x.round() as i64, p.y.round() as i64, self.sil)
    }

    /// Fraction of 1-px-spaced samples of the segment inside the silhouette.
    fn segment_inside_frac(&self, a: Point2, b: Point2) -> f64 {
        let len = a.distance(b);
        let steps = (len.ceil() as usize).max(1);
        let mut inside = 0usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            if self.inside_sil(a + (b - a) * t) {
                inside += 1;
            }
        }
        inside as f64 / (steps + 1) as f64
    }

    /// Silhouette thickness along `dir` through `p` (contiguous run).
    fn thickness_at(&self, p: Point2, dir: Point2, max_steps: usize) -> Option<f64> {
        if !self.inside_sil(p) {
            return None;
        }
        let mut total = 1.0;
        for sign in [1.0, -1.0] {
            let mut k = 1usize;
            while k <= max_steps && self.inside_sil(p + dir * (sign * k as f64)) {
                k += 1;
            }
            total += (k - 1) as f64;
        }
        Some(total)
    }

    fn near_skin(&self, p: Point2) -> bool {
        let (px, py) = (p.x.round() as i64, p.y.round() as i64);
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                if self.skin.test(px + dx, py + dy) {
                    return true;
                }
            }
        }
        false
    }
}

/// Deterministic, mirror-stable preference between equally distant extreme
/// candidates: farther from the mid-line first, then higher in the image.
fn better_tie(cx: f64, a: (u32, u32), b: (u32, u32)) -> bool {
    let da = (a.0 as f64 - cx).abs();
    let db = (b.0 as f64 - cx).abs();
    (da, b.1, a.0) > (db, a.1, b.0)
}

fn find_extreme(scene: &Scene, side: ArmSide, shoulder: Point2) -> Option<Point2> {
    let st = scene.comps.stats_of(scene.sil);
    let cx = scene.calib.body_center_x;
    let mut best: Option<(f64, (u32, u32))> = None;
    for y in st.min_y..=st.max_y {
        for x in st.min_x..=st.max_x {
            if !scene.comps.is(x as i64, y as i64, scene.sil) {
                continue;
            }
            let (fx, fy) = (x as f64, y as f64);
            if !scene.in_half_plane(side, fx) || scene.in_body_region(fx, fy) {
                continue;
            }
            let d2 = (fx - shoulder.x).powi(2) + (fy - shoulder.y).powi(2);
            let replace = match &best {
                None => true,
                Some((bd2, bpix)) => {
                    d2 > *bd2 || (d2 == *bd2 && better_tie(cx, (x, y), *bpix))
                }
            };
            if replace {
                best = Some((d2, (x, y)));
            }
        }
    }
    best.map(|(_, (x, y))| Vec2::new(x as f64, y as f64))
}

/// Resolve a genuinely ambiguous extreme: when a rival candidate within
/// the tie fraction of the farthest distance lies well away from it (a
/// second blob tip, not just the same fist cap), prefer the one closest
/// to the previous wrist. Unambiguous results are left untouched.
fn find_extreme_near_prev(
    scene: &Scene,
    side: ArmSide,
    shoulder: Point2,
    best: Point2,
    prev_wrist: Point2,
    tie_fraction: f64,
) -> Point2 {
    let d_best = best.distance(shoulder);
    let floor = (1.0 - tie_fraction) * d_best;
    let st = scene.comps.stats_of(scene.sil);
    let same_tip_radius = 1.5 * scene.calib.arm_width;
    let mut rival = false;
    let mut chosen = best;
    let mut chosen_prev_d = best.distance(prev_wrist);
    for y in st.min_y..=st.max_y {
        for x in st.min_x..=st.max_x {
            if !scene.comps.is(x as i64, y as i64, scene.sil) {
                continue;
            }
            let p = Vec2::new(x as f64, y as f64);
            if !scene.in_half_plane(side, p.x) || scene.in_body_region(p.x, p.y) {
                continue;
            }
            if p.distance(shoulder) < floor {
                continue;
            }
            if p.distance(best) > same_tip_radius {
                rival = true;
                let dp = p.distance(prev_wrist);
                if dp < chosen_prev_d {
                    chosen = p;
                    chosen_prev_d = dp;
                }
            }
        }
    }
    if rival {
        chosen
    } else {
        best
    }
}

fn detect_arm(
    scene: &Scene,
    side: ArmSide,
    prev: Option<&Arm2D>,
) -> Result<Arm2D, VisionError> {
    let calib = scene.calib;
    let cfg = scene.cfg;
    let shoulder = match side {
        ArmSide::Left => calib.shoulder_left,
        ArmSide::Right => calib.shoulder_right,
    };
    let aw = calib.arm_width;

    let mut extreme = find_extreme(scene, side, shoulder);
    if let (Some(e), Some(p)) = (extreme, prev) {
        if p.branch != DetectionBranch::Carried {
            extreme = Some(find_extreme_near_prev(
                scene,
                side,
                shoulder,
                e,
                p.wrist,
                cfg.tie_fraction,
            ));
        }
    }

    // Occlusion trigger: nothing pokes out of the torso region far enough
    // to be a free hand.
    let clear = extreme
        .map(|e| scene.reach_past_torso(e) > cfg.occlusion_reach * aw)
        .unwrap_or(false);
    if !clear {
        return occluded_arm(scene, shoulder, extreme, prev);
    }
    let tip = extreme.expect("cleared reach check");

    // Straight-arm test on the shoulder -> pulled-back-tip chord.
    let dir = (tip - shoulder).normalized();
    let wrist_straight = tip - dir * (aw / 2.0);
    let chord_len = wrist_straight.distance(shoulder);
    let steps = (chord_len.ceil() as usize).max(1);
    let perp = dir.perp();
    let max_walk = (cfg.width_band.1 * aw).ceil() as usize + 2;
    let mut inside = 0usize;
    let mut distal_total = 0usize;
    let mut distal_ok = 0usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let p = shoulder + dir * (t * chord_len);
        let is_in = scene.inside_sil(p);
        if is_in {
            inside += 1;
        }
        if t > 0.5 {
            distal_total += 1;
            if let Some(th) = scene.thickness_at(p, perp, max_walk) {
                if th >= cfg.width_band.0 * aw && th <= cfg.width_band.1 * aw {
                    distal_ok += 1;
                }
            }
        }
    }
    let inside_frac = inside as f64 / (steps + 1) as f64;
    let width_frac = if distal_total == 0 {
        0.0
    } else {
        distal_ok as f64 / distal_total as f64
    };

    let arm = if inside_frac >= cfg.line_inside_frac && width_frac >= cfg.width_band_frac {
        // Straight reading. A chord shorter than the full arm means some
        // foreshortening is hidden in it; the elbow can only sit inside
        // [chord - forearm, upper_arm] along the chord, so take the
        // midpoint of that feasible interval (exact at full extension).
        let fl = calib.forearm_len();
        let l1_lo = (chord_len - fl).max(0.0);
        let l1_hi = calib.upper_arm_len.min(chord_len);
        let straight = Arm2D {
            shoulder,
            elbow: shoulder + dir * (0.5 * (l1_lo + l1_hi)),
            wrist: wrist_straight,
            occluded: false,
            confidence: inside_frac,
            branch: DetectionBranch::Straight,
        };
        // A pronounced boundary corner is positive evidence of a visible
        // bend the chord test missed (a bend mostly toward the camera);
        // it wins over the straight reading.
        match bent_arm(scene, side, shoulder, wrist_straight, prev)? {
            Some((bent, deflection))
                if deflection >= cfg.corner_deflection_ratio * aw =>
            {
                bent
            }
            _ => straight,
        }
    } else {
        match bent_arm(scene, side, shoulder, wrist_straight, prev)? {
            Some((arm, _)) => arm,
            None => return occluded_arm(scene, shoulder, extreme, prev),
        }
    };
    Ok(enforce_length_limits(arm, calib))
}

/// Bent-arm branch: the tip is the wrist if it reads as skin; the elbow is
/// searched on the silhouette boundary for the strongest bend corner that
/// fits the calibrated segment lengths. Returns the arm plus the corner's
/// deflection off the shoulder-wrist chord, or None when the tip cannot
/// be a wrist at all.
fn bent_arm(
    scene: &Scene,
    side: ArmSide,
    shoulder: Point2,
    wrist: Point2,
    prev: Option<&Arm2D>,
) -> Result<Option<(Arm2D, f64)>, VisionError> {
    let calib = scene.calib;
    let cfg = scene.cfg;
    if !scene.near_skin(wrist) {
        return Ok(None);
    }
    let aw = calib.arm_width;
    let ul = calib.upper_arm_len;
    let fl = calib.forearm_len();
    let tol = cfg.length_tolerance;

    let st = scene.comps.stats_of(scene.sil);
    // Projected segments can only shrink under foreshortening, so the
    // length windows are one-sided: at most the calibrated length (plus
    // tolerance), at least a fifth of it to reject degenerate fits.
    let ann_lo = 0.2 * ul;
    let ann_hi = (1.0 + tol) * ul + aw;

    struct Candidate {
        elbow: Point2,
        /// Bend deflection: distance of the boundary corner from the
        /// shoulder-to-wrist chord. The true outer elbow corner is the
        /// deflection maximum of the arm outline.
        deflection: f64,
        confidence: f64,
    }
    let mut candidates: Vec<Candidate> = Vec::new();

    for y in st.min_y..=st.max_y {
        for x in st.min_x..=st.max_x {
            let (ix, iy) = (x as i64, y as i64);
            if !scene.comps.is(ix, iy, scene.sil) {
                continue;
            }
            // boundary pixel: an 8-neighbour leaves the silhouette
            let on_boundary = (-1..=1).any(|dy: i64| {
                (-1..=1).any(|dx: i64| {
                    (dx != 0 || dy != 0) && !scene.comps.is(ix + dx, iy + dy, scene.sil)
                })
            });
            if !on_boundary {
                continue;
            }
            let b = Vec2::new(x as f64, y as f64);
            if !scene.in_half_plane(side, b.x) || scene.in_body_region(b.x, b.y) {
                continue;
            }
            let d_sh = b.distance(shoulder);
            if d_sh < ann_lo || d_sh > ann_hi {
                continue;
            }
            // Pull the boundary corner half an arm width toward the joint
            // center along the bend bisector.
            let n1 = (shoulder - b).normalized();
            let n2 = (wrist - b).normalized();
            let bis = n1 + n2;
            let elbow = if bis.norm() > 1e-6 {
                b + bis.normalized() * (aw / 2.0)
            } else {
                b
            };
            let len1 = elbow.distance(shoulder);
            let len2 = elbow.distance(wrist);
            if len1 > (1.0 + tol) * ul || len1 < 0.2 * ul {
                continue;
            }
            if len2 > (1.0 + tol) * fl || len2 < 0.2 * fl {
                continue;
            }
            let f1 = scene.segment_inside_frac(shoulder, elbow);
            let f2 = scene.segment_inside_frac(elbow, wrist);
            if f1 < cfg.line_inside_frac || f2 < cfg.line_inside_frac {
                continue;
            }
            candidates.push(Candidate {
                elbow,
                deflection: point_segment_distance(b, shoulder, wrist),
                confidence: (f1 + f2) / 2.0,
            });
        }
    }

    let chosen = if candidates.is_empty() {
        // No boundary point fits; fall back to the chord split, at reduced
        // confidence.
        let elbow = shoulder + (wrist - shoulder) * (ul / (ul + fl));
        Candidate {
            elbow,
            deflection: 0.0,
            confidence: scene.segment_inside_frac(shoulder, wrist) * 0.5,
        }
    } else {
        // Largest deflection wins; near-ties resolve toward the previous
        // frame's elbow when one is available.
        let mut chosen_idx = 0usize;
        for (i, c) in candidates.iter().enumerate() {
            if c.deflection > candidates[chosen_idx].deflection {
                chosen_idx = i;
            }
        }
        if let Some(p) = prev.filter(|p| p.branch != DetectionBranch::Carried) {
            let best = candidates[chosen_idx].deflection;
            let floor = best * (1.0 - cfg.tie_fraction);
            let mut best_d = candidates[chosen_idx].elbow.distance(p.elbow);
            for (i, c) in candidates.iter().enumerate() {
                if c.deflection >= floor {
                    let d = c.elbow.distance(p.elbow);
                    if d < best_d {
                        best_d = d;
                        chosen_idx = i;
                    }
                }
            }
        }
        candidates.swap_remove(chosen_idx)
    };

    Ok(Some((
        Arm2D {
            shoulder,
            elbow: chosen.elbow,
            wrist,
            occluded: false,
            confidence: chosen.confidence,
            branch: DetectionBranch::Bent,
        },
        chosen.deflection,
    )))
}

/// Occlusion branch: the hand is somewhere over the torso. Its wrist comes
/// from the skin component over the torso band (distal end); the elbow
/// from the outermost silhouette tip of this arm's half-plane.
fn occluded_arm(
    scene: &Scene,
    shoulder: Point2,
    extreme: Option<Point2>,
    prev: Option<&Arm2D>,
) -> Result<Arm2D, VisionError> {
    let calib = scene.calib;
    let aw = calib.arm_width;
    let cx = calib.body_center_x;
    let tt = calib.torso_top();
    let band_half = scene.band_half();

    // Rank skin components (head excluded) by pixel count over the torso.
    let mut overlap = vec![0usize; scene.skin_comps.count() + 1];
    let w = scene.skin.width();
    let h = scene.skin.height();
    for y in (tt.max(0.0) as u32)..h {
        for x in 0..w {
            if (x as f64 - cx).abs() > band_half {
                continue;
            }
            let l = scene.skin_comps.label_at(x, y);
            if l != 0 && Some(l) != scene.head_label {
                overlap[l as usize] += 1;
            }
        }
    }
    let min_overlap = (0.2 * aw * aw).max(9.0) as usize;
    let hand_label = (1..overlap.len())
        .filter(|&l| overlap[l] >= min_overlap)
        .max_by_key(|&l| (overlap[l], std::cmp::Reverse(l)))
        .map(|l| l as u32);

    let Some(hand_label) = hand_label else {
        // Ambiguous: no skin over the torso and no extreme point.
        return match prev {
            Some(p) => Ok(Arm2D {
                confidence: 0.0,
                branch: DetectionBranch::Carried,
                ..*p
            }),
            None => Err(VisionError::AmbiguousOcclusion),
        };
    };

    // Distal end of the over-torso skin: farthest in-band pixel from the
    // shoulder; the wrist is the centroid of the blob tip around it.
    let st = scene.skin_comps.stats_of(hand_label);
    let mut distal: Option<(f64, (u32, u32))> = None;
    for y in st.min_y..=st.max_y {
        for x in st.min_x..=st.max_x {
            if scene.skin_comps.label_at(x, y) != hand_label {
                continue;
            }
            let p = Vec2::new(x as f64, y as f64);
            if (p.x - cx).abs() > band_half || p.y < tt {
                continue;
            }
            let d2 = (p.x - shoulder.x).powi(2) + (p.y - shoulder.y).powi(2);
            let replace = match &distal {
                None => true,
                Some((bd2, bpix)) => d2 > *bd2 || (d2 == *bd2 && better_tie(cx, (x, y), *bpix)),
            };
            if replace {
                distal = Some((d2, (x, y)));
            }
        }
    }
    let Some((_, (dx, dy))) = distal else {
        return match prev {
            Some(p) => Ok(Arm2D {
                confidence: 0.0,
                branch: DetectionBranch::Carried,
                ..*p
            }),
            None => Err(VisionError::AmbiguousOcclusion),
        };
    };
    let d = Vec2::new(dx as f64, dy as f64);
    let mut sum = Vec2::zero();
    let mut n = 0.0;
    for y in st.min_y..=st.max_y {
        for x in st.min_x..=st.max_x {
            if scene.skin_comps.label_at(x, y) != hand_label {
                continue;
            }
            let p = Vec2::new(x as f64, y as f64);
            if p.distance(d) <= aw {
                sum = sum + p;
                n += 1.0;
            }
        }
    }
    let wrist = sum / n;

    // Elbow from the outermost silhouette tip, pulled toward the joint.
    let elbow = match extreme {
        Some(e) => {
            let n1 = (shoulder - e).normalized();
            let n2 = (wrist - e).normalized();
            let bis = n1 + n2;
            if bis.norm() > 1e-6 {
                e + bis.normalized() * (aw / 2.0)
            } else {
                e
            }
        }
        None => {
            let ul = calib.upper_arm_len;
            let fl = calib.forearm_len();
            shoulder + (wrist - shoulder) * (ul / (ul + fl))
        }
    };

    let confidence = scene.segment_inside_frac(shoulder, elbow);
    Ok(enforce_length_limits(
        Arm2D {
            shoulder,
            elbow,
            wrist,
            occluded: true,
            confidence,
            branch: DetectionBranch::Occluded,
        },
        calib,
    ))
}

/// Projections can never exceed the physical limb lengths (plus an arm
/// width of slack). The wrist is the best-observed joint, so violations
/// move the elbow (and only cap the wrist by the whole-arm reach).
fn enforce_length_limits(mut arm: Arm2D, calib: &Calibration) -> Arm2D {
    let aw = calib.arm_width;
    let max_upper = calib.upper_arm_len + aw;
    let max_fore = calib.forearm_len() + aw;

    let reach = arm.wrist.distance(arm.shoulder);
    if reach > max_upper + max_fore {
        arm.wrist =
            arm.shoulder + (arm.wrist - arm.shoulder) * ((max_upper + max_fore) / reach);
    }
    let d_fore = arm.wrist.distance(arm.elbow);
    if d_fore > max_fore {
        arm.elbow = arm.wrist + (arm.elbow - arm.wrist) * (max_fore / d_fore);
    }
    let d_upper = arm.elbow.distance(arm.shoulder);
    if d_upper > max_upper {
        arm.elbow = arm.shoulder + (arm.elbow - arm.shoulder) * (max_upper / d_upper);
        if arm.wrist.distance(arm.elbow) > max_fore {
            // Both caps bind: the elbow goes on the shoulder-wrist chord,
            // which satisfies both because the reach is already capped.
            let dir = (arm.wrist - arm.shoulder).normalized();
            arm.elbow = arm.shoulder + dir * max_upper;
        }
    }
    arm
}
