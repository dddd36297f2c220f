//! Floating-point scalar abstraction.
//!
//! All numeric code in this crate is generic over [`Scalar`], which is any
//! IEEE float with the arithmetic and conversion traits the engine needs.
//! The shipped pipeline runs at `f64` (see the type aliases at the crate
//! root); `f32` is available for memory-bound experiments.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Display
    + Debug
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` constant into `Self`.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant converts to Scalar")
    }

    fn from_usize_c(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to Scalar")
    }

    fn to_f64_c(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_conversion_round_trips() {
        assert_eq!(f64::c(0.5), 0.5);
        assert_eq!(f32::c(0.5), 0.5f32);
        assert_eq!(f64::from_usize_c(7), 7.0);
        assert_eq!(1.25f64.to_f64_c(), 1.25);
    }
}
