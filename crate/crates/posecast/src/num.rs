//! Scalar abstraction: every geometric routine in this crate is generic over
//! the floating point type through [`Real`].

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + core::fmt::Debug + core::fmt::Display + Default + 'static
{
    /// Lossy conversion from an f64 literal.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Degrees to radians.
pub fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::of(core::f64::consts::PI / 180.0)
}

/// Radians to degrees.
pub fn rad_to_deg<T: Real>(rad: T) -> T {
    rad * T::of(180.0 / core::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_radian_roundtrip() {
        let d: f64 = 123.456;
        assert!((rad_to_deg(deg_to_rad(d)) - d).abs() < 1e-12);
        let f: f32 = -45.0;
        assert!((rad_to_deg(deg_to_rad(f)) - f).abs() < 1e-4);
    }
}
