//! Scalar abstraction shared by the estimators and the index policy.
//!
//! Everything that only touches observed costs (buffers, empirical risk,
//! confidence radii, the policy state) is generic over [`Scalar`], so the
//! same code runs in `f32` or `f64`. The simulation side (arm models,
//! quadrature oracles, the experiment runner) works in `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widens to `f64` (lossless for `f32` and `f64`).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x^p` with fast paths for the exponents that show up in practice.
#[inline]
pub(crate) fn pow_real<T: Scalar>(x: T, p: T) -> T {
    if p == T::one() {
        x
    } else if p == T::lit(2.0) {
        x * x
    } else {
        x.powf(p)
    }
}

/// `x^(1/p)` with fast paths for `p = 1` and `p = 2`.
#[inline]
pub(crate) fn root_real<T: Scalar>(x: T, p: T) -> T {
    if p == T::one() {
        x
    } else if p == T::lit(2.0) {
        x.sqrt()
    } else {
        x.powf(p.recip())
    }
}
