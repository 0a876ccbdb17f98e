//! Numeric abstraction shared by every stage of the pipeline.
//!
//! Auction prices, normalized metrics, weights and change ratios are all
//! computed over a [`Scalar`]. `f64` is the working type; `f32` is supported
//! for compact storage, and [`BigRational`] gives exact arithmetic, which the
//! test suite uses to cross-check the floating-point search.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar: Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    /// False for NaN and infinities. Exact types are always finite.
    fn is_finite_value(&self) -> bool;

    /// `num / den` for grid weights. Exact for rational scalars.
    fn from_ratio(num: usize, den: usize) -> Self {
        Self::from_usize(num).expect("usize fits scalar") / Self::from_usize(den).expect("usize fits scalar")
    }

    /// Lossy conversion from `f64`; returns `None` for non-finite input.
    fn from_f64_value(v: f64) -> Option<Self> {
        if v.is_finite() {
            Self::from_f64(v)
        } else {
            None
        }
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn is_finite_value(&self) -> bool {
        true
    }

    fn from_ratio(num: usize, den: usize) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

/// Returns the larger of two scalars, preferring `a` on ties.
pub(crate) fn max_ref<'a, T: Scalar>(a: &'a T, b: &'a T) -> &'a T {
    if b > a {
        b
    } else {
        a
    }
}
