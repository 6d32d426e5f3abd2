//! Order-statistic and moment primitives over observation buffers.

use std::cell::{Ref, RefCell};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{pow_real, Scalar};

/// Observations of one arm (or of a whole policy run), in arrival order.
///
/// A sorted copy is kept alongside and refreshed lazily: appends only grow
/// `values`, and the next order-statistic query merges the new tail in.
/// Because the cached prefix is already sorted, the refresh is a linear merge
/// rather than a full sort.
#[derive(Debug, Clone, Default)]
pub struct SampleBuffer<T> {
    values: Vec<T>,
    sorted: RefCell<Vec<T>>,
}

impl<T: Scalar> SampleBuffer<T> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            sorted: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            values: Vec::with_capacity(capacity),
            sorted: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    /// Appends one observation.
    ///
    /// # Panics
    /// If `x` is not finite.
    pub fn push(&mut self, x: T) {
        assert!(x.is_finite(), "sample values must be finite");
        self.values.push(x);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observations in arrival order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Observations in ascending order.
    pub fn sorted(&self) -> Ref<'_, [T]> {
        {
            let mut sorted = self.sorted.borrow_mut();
            let have = sorted.len();
            if have < self.values.len() {
                sorted.extend_from_slice(&self.values[have..]);
                sorted.sort_by(cmp_finite);
            }
        }
        Ref::map(self.sorted.borrow(), Vec::as_slice)
    }

    fn non_empty(&self) -> Result<()> {
        if self.values.is_empty() {
            Err(Error::EmptyBuffer)
        } else {
            Ok(())
        }
    }
}

impl<T: Scalar> FromIterator<T> for SampleBuffer<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut buf = SampleBuffer::new();
        for x in iter {
            buf.push(x);
        }
        buf
    }
}

impl<T: Scalar> From<Vec<T>> for SampleBuffer<T> {
    fn from(values: Vec<T>) -> Self {
        values.into_iter().collect()
    }
}

impl<T: Scalar> From<&[T]> for SampleBuffer<T> {
    fn from(values: &[T]) -> Self {
        values.iter().copied().collect()
    }
}

#[inline]
fn cmp_finite<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Fraction of observations that are `<= x`.
pub fn empirical_cdf<T: Scalar>(buf: &SampleBuffer<T>, x: T) -> Result<T> {
    buf.non_empty()?;
    let sorted = buf.sorted();
    let at_most = sorted.partition_point(|v| *v <= x);
    Ok(T::count(at_most) / T::count(sorted.len()))
}

/// 1-based rank of the empirical `alpha`-quantile in a sample of size `n`:
/// the smallest `i` with `i / n >= alpha`. `alpha = 0` maps to the minimum.
pub(crate) fn quantile_rank<T: Scalar>(n: usize, alpha: T) -> usize {
    debug_assert!(n > 0);
    if alpha <= T::zero() {
        return 1;
    }
    let nf = T::count(n);
    let guess = (alpha * nf).ceil().to_usize().unwrap_or(n).clamp(1, n);
    let mut i = guess;
    // Correct the rounding of alpha * n against the defining comparison.
    while i > 1 && T::count(i - 1) / nf >= alpha {
        i -= 1;
    }
    while i < n && T::count(i) / nf < alpha {
        i += 1;
    }
    i
}

/// Empirical `alpha`-quantile, `inf { x : F_n(x) >= alpha }`.
///
/// For `alpha = 0` the infimum is unbounded below; the minimum sample is
/// returned instead, which leaves the CVaR representation unchanged.
pub fn empirical_quantile<T: Scalar>(buf: &SampleBuffer<T>, alpha: T) -> Result<T> {
    buf.non_empty()?;
    check_level(alpha)?;
    let sorted = buf.sorted();
    Ok(sorted[quantile_rank(sorted.len(), alpha) - 1])
}

pub fn sample_mean<T: Scalar>(buf: &SampleBuffer<T>) -> Result<T> {
    buf.non_empty()?;
    Ok(mean_of(buf.values()))
}

#[inline]
pub(crate) fn mean_of<T: Scalar>(values: &[T]) -> T {
    let sum = values.iter().fold(T::zero(), |acc, &x| acc + x);
    sum / T::count(values.len())
}

/// `(1/n) * sum |x_t - center|^p`, i.e. the p-th power of the centered L_p norm.
pub fn centered_p_moment<T: Scalar>(buf: &SampleBuffer<T>, center: T, p: T) -> Result<T> {
    buf.non_empty()?;
    check_exponent(p)?;
    Ok(p_moment_of(buf.values(), center, p))
}

#[inline]
pub(crate) fn p_moment_of<T: Scalar>(values: &[T], center: T, p: T) -> T {
    let sum = values
        .iter()
        .fold(T::zero(), |acc, &x| acc + pow_real((x - center).abs(), p));
    sum / T::count(values.len())
}

pub(crate) fn check_level<T: Scalar>(alpha: T) -> Result<()> {
    if alpha >= T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in [0, 1]")))
    }
}

pub(crate) fn check_exponent<T: Scalar>(p: T) -> Result<()> {
    if p >= T::one() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param("p", format!("{p} must be a finite real >= 1")))
    }
}
