//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating point scalar: `f32` or `f64`.
///
/// Algorithm parameters (tolerances, thresholds, penalties) are carried as
/// `f64` in the config structs and converted with [`Real::lit`] at the point
/// of use.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Widens to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self;

    /// Smallest positive normal value.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }

    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }

    fn tiny() -> Self {
        f64::MIN_POSITIVE
    }
}
