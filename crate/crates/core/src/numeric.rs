//! Root bracketing and quadrature used by the estimators and the oracles.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Iteration cap for every bisection in the crate.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Finds `inf { x in [lo, hi] : g(x) <= 0 }` for a nonincreasing `g`.
///
/// The bracket must satisfy `g(hi) <= 0`. Iteration stops when the bracket is
/// narrower than `tol`, or than a few ulps of the bracket's magnitude, so a
/// zero `tol` means "to machine precision".
pub(crate) fn bisect_nonincreasing<T, F>(
    mut g: F,
    lo: T,
    hi: T,
    tol: T,
    max_iter: usize,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if lo.is_nan() || hi.is_nan() || lo > hi || !tol.is_finite() || tol < T::zero() {
        return Err(Error::param("bracket", "need lo <= hi and finite tol >= 0"));
    }
    if g(lo) <= T::zero() {
        return Ok(lo);
    }
    if g(hi) > T::zero() {
        return Err(Error::AssumptionViolated(
            "objective is positive at the upper end of the bracket".into(),
        ));
    }
    let scale = lo.abs().max(hi.abs()).max(hi - lo);
    let floor = tol.max(T::lit(4.0) * T::epsilon() * scale);
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..max_iter {
        if hi - lo <= floor {
            return Ok(midpoint(lo, hi));
        }
        let mid = midpoint(lo, hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if g(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= floor {
        Ok(midpoint(lo, hi))
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
        })
    }
}

#[inline]
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    lo + (hi - lo) / T::lit(2.0)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Integrands with kinks should be split at the kinks by the caller
/// (see [`integrate_pieces`]).
pub(crate) fn integrate<F>(f: &F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    // Seed with a handful of panels so narrow features are not skipped.
    const PANELS: usize = 8;
    let width = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == PANELS { b } else { lo + width };
            let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, flo, fmid, fhi);
            adapt(f, lo, hi, flo, fmid, fhi, whole, tol / PANELS as f64, 48)
        })
        .sum()
}

/// Integrates over `[a, b]`, splitting at every interior point of `cuts`.
pub(crate) fn integrate_pieces<F>(f: &F, a: f64, b: f64, cuts: &[f64], tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut points: Vec<f64> = cuts.iter().copied().filter(|c| *c > a && *c < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut total = 0.0;
    let mut lo = a;
    let pieces = points.len() + 1;
    for hi in points.into_iter().chain(std::iter::once(b)) {
        total += integrate(f, lo, hi, tol / pieces as f64);
        lo = hi;
    }
    total
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
