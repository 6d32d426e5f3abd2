//! Loss functions for the shortfall risk measure.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Strictly increasing loss `l` with `l(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum LossFunction<T> {
    /// `l(t) = t`; shortfall reduces to the mean.
    Identity,
    /// `l(t) = e^t - 1`, the exponential loss.
    ExpMinusOne,
    PiecewiseLinear(PiecewiseLinear<T>),
}

/// Continuous piecewise-linear loss through the origin.
///
/// `slopes[i]` applies on `[breakpoints[i-1], breakpoints[i])`, with the
/// first and last pieces extending to infinity. The loss is the integral of
/// that step function from 0, so `l(0) = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T> {
    breakpoints: Vec<T>,
    slopes: Vec<T>,
}

/// Constants of a loss restricted to `[-M, M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants<T> {
    /// `C_l = sup l'`.
    pub lipschitz: T,
    /// `m_l = inf l' > 0`.
    pub derivative_floor: T,
    /// `M_l = max(|l(-M)|, l(M))`.
    pub magnitude: T,
}

impl<T: Scalar> PiecewiseLinear<T> {
    pub fn new(breakpoints: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::param(
                "slopes",
                format!(
                    "expected {} slopes for {} breakpoints, got {}",
                    breakpoints.len() + 1,
                    breakpoints.len(),
                    slopes.len()
                ),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::param(
                "breakpoints",
                "must be finite and strictly increasing",
            ));
        }
        if slopes.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(Error::param("slopes", "every slope must be finite and > 0"));
        }
        Ok(Self {
            breakpoints,
            slopes,
        })
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    fn pieces(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        (0..self.slopes.len()).map(move |i| {
            let left = if i == 0 {
                T::neg_infinity()
            } else {
                self.breakpoints[i - 1]
            };
            let right = self.breakpoints.get(i).copied().unwrap_or_else(T::infinity);
            (left, right, self.slopes[i])
        })
    }

    /// Integral of the slope function over `[lo, hi]`, `lo <= hi`.
    fn integral(&self, lo: T, hi: T) -> T {
        self.pieces().fold(T::zero(), |acc, (left, right, slope)| {
            let overlap = hi.min(right) - lo.max(left);
            if overlap > T::zero() {
                acc + slope * overlap
            } else {
                acc
            }
        })
    }

    fn value(&self, t: T) -> T {
        if t >= T::zero() {
            self.integral(T::zero(), t)
        } else {
            -self.integral(t, T::zero())
        }
    }

    /// Right derivative.
    fn derivative(&self, t: T) -> T {
        let piece = self.breakpoints.partition_point(|b| *b <= t);
        self.slopes[piece]
    }

    fn slope_range(&self, lo: T, hi: T) -> (T, T) {
        self.pieces()
            .filter(|(left, right, _)| *left < hi && *right > lo)
            .fold((T::infinity(), T::zero()), |(min, max), (_, _, s)| {
                (min.min(s), max.max(s))
            })
    }
}

impl<T: Scalar> LossFunction<T> {
    #[inline]
    pub fn value(&self, t: T) -> T {
        match self {
            LossFunction::Identity => t,
            LossFunction::ExpMinusOne => t.exp_m1(),
            LossFunction::PiecewiseLinear(pl) => pl.value(t),
        }
    }

    /// `l'(t)`; right derivative at the kinks of a piecewise-linear loss.
    #[inline]
    pub fn derivative(&self, t: T) -> T {
        match self {
            LossFunction::Identity => T::one(),
            LossFunction::ExpMinusOne => t.exp(),
            LossFunction::PiecewiseLinear(pl) => pl.derivative(t),
        }
    }

    /// Points where `l'` jumps.
    pub fn kinks(&self) -> &[T] {
        match self {
            LossFunction::PiecewiseLinear(pl) => pl.breakpoints(),
            _ => &[],
        }
    }

    /// `C_l`, `m_l` and `M_l` on `[-M, M]`.
    pub fn constants(&self, support_bound: T) -> Result<LossConstants<T>> {
        let m = support_bound;
        if !(m > T::zero() && m.is_finite()) {
            return Err(Error::param("support_bound", "must be finite and > 0"));
        }
        let (floor, lipschitz) = match self {
            LossFunction::Identity => (T::one(), T::one()),
            LossFunction::ExpMinusOne => ((-m).exp(), m.exp()),
            LossFunction::PiecewiseLinear(pl) => pl.slope_range(-m, m),
        };
        Ok(LossConstants {
            lipschitz,
            derivative_floor: floor,
            magnitude: self.value(-m).abs().max(self.value(m)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn hinge() -> LossFunction<f64> {
        // slope 0.5 below -0.2, 1 on [-0.2, 0.3), 3 above 0.3
        LossFunction::PiecewiseLinear(
            PiecewiseLinear::new(vec![-0.2, 0.3], vec![0.5, 1.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn exp_loss_constants_on_unit_interval() {
        let c = LossFunction::ExpMinusOne.constants(1.0).unwrap();
        assert!((c.lipschitz - E).abs() < 1e-15);
        assert!((c.derivative_floor - 1.0 / E).abs() < 1e-15);
        assert!((c.magnitude - (E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn identity_constants() {
        let c = LossFunction::<f64>::Identity.constants(2.0).unwrap();
        assert_eq!(
            (c.lipschitz, c.derivative_floor, c.magnitude),
            (1.0, 1.0, 2.0)
        );
    }

    #[test]
    fn piecewise_values_and_derivatives() {
        let l = hinge();
        assert_eq!(l.value(0.0), 0.0);
        assert!((l.value(0.3) - 0.3).abs() < 1e-15);
        assert!((l.value(0.5) - (0.3 + 0.6)).abs() < 1e-15);
        assert!((l.value(-0.2) + 0.2).abs() < 1e-15);
        assert!((l.value(-1.0) + (0.2 + 0.4)).abs() < 1e-15);
        assert_eq!(l.derivative(0.0), 1.0);
        assert_eq!(l.derivative(0.3), 3.0);
        assert_eq!(l.derivative(-0.5), 0.5);
        let c = l.constants(1.0).unwrap();
        assert_eq!((c.derivative_floor, c.lipschitz), (0.5, 3.0));
        assert!((c.magnitude - 2.4).abs() < 1e-15);
        // A narrower interval sees only the middle piece.
        let c = l.constants(0.1).unwrap();
        assert_eq!((c.derivative_floor, c.lipschitz), (1.0, 1.0));
    }

    #[test]
    fn piecewise_validation() {
        assert!(PiecewiseLinear::new(vec![0.1], vec![1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.2, 0.1], vec![1.0, 1.0, 1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.1], vec![1.0, 0.0]).is_err());
        assert!(PiecewiseLinear::new(Vec::<f64>::new(), vec![2.0]).is_ok());
    }

    #[test]
    fn losses_are_strictly_increasing() {
        for l in [LossFunction::Identity, LossFunction::ExpMinusOne, hinge()] {
            let mut prev = l.value(-1.0);
            for i in 1..=200 {
                let t = -1.0 + i as f64 / 100.0;
                let v = l.value(t);
                assert!(v > prev, "{l:?} not increasing at {t}");
                prev = v;
            }
        }
    }
}
