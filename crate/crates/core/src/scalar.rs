//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the construction is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + FloatConst {
    /// Smallest positive normal number.
    fn min_normal() -> Self;
}

impl Real for f32 {
    fn min_normal() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Real for f64 {
    fn min_normal() -> Self {
        f64::MIN_POSITIVE
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion back to `f64` for reports and errors.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `base` for `f64`; widened to a few thousand ulps for lower precision types.
#[inline]
pub fn tol<T: Real>(base: f64) -> T {
    let floor = T::default_epsilon() * lit::<T>(1e4);
    let base = lit::<T>(base);
    if floor > base {
        floor
    } else {
        base
    }
}
