//! Scalar abstractions.
//!
//! Network state, learning rules and accuracy metrics are written against
//! [`Real`] (implemented for `f32` and `f64`). The analytic cost model only
//! needs field arithmetic and is written against [`Count`], which also admits
//! exact rationals so golden values can be compared without rounding.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar used for membranes, weights and metrics.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; never fails for the implemented types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Real")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar for operation and memory counts. Fractional counts are legitimate
/// because sparsities are averages.
pub trait Count: Clone + Num + PartialOrd + FromPrimitive + Debug {
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar")
    }
}

impl<T> Count for T where T: Clone + Num + PartialOrd + FromPrimitive + Debug {}

/// Exact rational counts.
pub type Exact = num_rational::Ratio<i64>;

/// `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Exact {
    Exact::new(num, den)
}
