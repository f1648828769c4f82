//! Minimal 2D/3D vector and rotation math, generic over the scalar type.
//!
//! Shared coordinate convention (all modules): origin at the top-left image
//! corner, x to the right, y downward, z toward the camera. The basis is
//! right-handed (`x × y = z`).

use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Unit vector, or zero when the norm underflows.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            Self::zero()
        }
    }

    /// Counter-clockwise perpendicular (in the y-down raster frame this is
    /// the clockwise visual direction; only the axis matters to callers).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self / n
        } else {
            Self::zero()
        }
    }

    /// Orthographic projection: drop z.
    pub fn xy(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    /// Mirror across the vertical plane x = 0.
    pub fn mirror_x(self) -> Self {
        Self::new(-self.x, self.y, self.z)
    }
}

macro_rules! vec_ops {
    ($name:ident { $($f:ident),+ }) => {
        impl<T: Real> Add for $name<T> {
            type Output = Self;
            fn add(self, o: Self) -> Self {
                Self { $($f: self.$f + o.$f),+ }
            }
        }
        impl<T: Real> Sub for $name<T> {
            type Output = Self;
            fn sub(self, o: Self) -> Self {
                Self { $($f: self.$f - o.$f),+ }
            }
        }
        impl<T: Real> Neg for $name<T> {
            type Output = Self;
            fn neg(self) -> Self {
                Self { $($f: -self.$f),+ }
            }
        }
        impl<T: Real> Mul<T> for $name<T> {
            type Output = Self;
            fn mul(self, s: T) -> Self {
                Self { $($f: self.$f * s),+ }
            }
        }
        impl<T: Real> Div<T> for $name<T> {
            type Output = Self;
            fn div(self, s: T) -> Self {
                Self { $($f: self.$f / s),+ }
            }
        }
    };
}

vec_ops!(Vec2 { x, y });
vec_ops!(Vec3 { x, y, z });

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, l) = (T::zero(), T::one());
        Self {
            m: [[l, o, o], [o, l, o], [o, o, l]],
        }
    }

    /// Right-handed rotation about the x axis, angle in radians.
    pub fn rot_x(a: T) -> Self {
        let (s, c) = (a.sin(), a.cos());
        let (o, l) = (T::zero(), T::one());
        Self {
            m: [[l, o, o], [o, c, -s], [o, s, c]],
        }
    }

    /// Right-handed rotation about the y axis, angle in radians.
    pub fn rot_y(a: T) -> Self {
        let (s, c) = (a.sin(), a.cos());
        let (o, l) = (T::zero(), T::one());
        Self {
            m: [[c, o, s], [o, l, o], [-s, o, c]],
        }
    }

    /// Right-handed rotation about the z axis, angle in radians.
    pub fn rot_z(a: T) -> Self {
        let (s, c) = (a.sin(), a.cos());
        let (o, l) = (T::zero(), T::one());
        Self {
            m: [[c, -s, o], [s, c, o], [o, o, l]],
        }
    }

    pub fn transpose(self) -> Self {
        let mut m = self.m;
        for (r, c) in [(0, 1), (0, 2), (1, 2)] {
            let t = m[r][c];
            m[r][c] = m[c][r];
            m[c][r] = t;
        }
        Self { m }
    }

    /// Conjugation by diag(-1, 1, 1): the rotation mirrored across x = 0.
    pub fn mirror_conjugate_x(self) -> Self {
        let mut m = self.m;
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                if (r == 0) != (c == 0) {
                    *v = -*v;
                }
            }
        }
        Self { m }
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[r][0] * o.m[0][c] + self.m[r][1] * o.m[1][c] + self.m[r][2] * o.m[2][c];
            }
        }
        Self { m }
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }
}

/// Distance from point `p` to the segment `a`..`b`.
pub fn point_segment_distance<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn rotations_move_basis_vectors_right_handed() {
        let ex = Vec3::new(1.0, 0.0, 0.0);
        let ey = Vec3::new(0.0, 1.0, 0.0);
        let ez = Vec3::new(0.0, 0.0, 1.0);
        let q = core::f64::consts::FRAC_PI_2;

        let v = Mat3::rot_z(q) * ex; // x -> y
        assert!(v.distance(ey) < EPS);
        let v = Mat3::rot_x(q) * ey; // y -> z
        assert!(v.distance(ez) < EPS);
        let v = Mat3::rot_y(q) * ez; // z -> x
        assert!(v.distance(ex) < EPS);
    }

    #[test]
    fn matrix_transpose_inverts_rotation() {
        let r = Mat3::rot_y(0.3) * Mat3::rot_z(-0.7) * Mat3::rot_x(1.1);
        let v = Vec3::new(0.2, -1.5, 3.0);
        let back = r.transpose() * (r * v);
        assert!(back.distance(v) < 1e-9);
    }

    #[test]
    fn mirror_conjugate_mirrors_action() {
        let r = Mat3::rot_y(0.4) * Mat3::rot_x(0.9);
        let v = Vec3::new(0.3, 0.8, -0.2);
        let lhs = r.mirror_conjugate_x() * v.mirror_x();
        let rhs = (r * v).mirror_x();
        assert!(lhs.distance(rhs) < EPS);
    }

    #[test]
    fn segment_distance_cases() {
        let a = Vec2::new(0.0f64, 0.0);
        let b = Vec2::new(10.0, 0.0);
        assert!((point_segment_distance(Vec2::new(5.0, 3.0), a, b) - 3.0).abs() < EPS);
        assert!((point_segment_distance(Vec2::new(-4.0, 0.0), a, b) - 4.0).abs() < EPS);
        assert!((point_segment_distance(Vec2::new(13.0, 4.0), a, b) - 5.0).abs() < EPS);
    }

    #[test]
    fn works_at_f32() {
        let v: Vec2<f32> = Vec2::new(3.0, 4.0);
        assert!((v.norm() - 5.0).abs() < 1e-6);
    }
}
