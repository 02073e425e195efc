//! Scalar abstraction for the statistical routines.
//!
//! Closed forms (`p^k`, score-ratio bounds) work over any field-like type, so
//! they accept exact rationals as well as floats. Sampling needs `Float`.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A number usable as a probability or ratio.
pub trait Scalar: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

/// Converts a count into the scalar type.
pub fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// `true` when `value` lies in `[0, 1]`.
pub fn is_unit_interval<T: Scalar>(value: &T) -> bool {
    *value >= T::zero() && *value <= T::one()
}
