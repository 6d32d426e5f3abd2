//! Empirical risk estimators and the per-measure confidence radius used by
//! the lower-confidence-bound index.

use crate::arm_models::LossFunction;
use crate::empirical_stats::{
    check_exponent, check_level, mean_of, p_moment_of, quantile_rank, SampleBuffer,
};
use crate::error::{Error, Result};
use crate::numeric::{bisect_nonincreasing, MAX_BISECTION_ITERS};
use crate::scalar::{root_real, Scalar};

/// Which form of the mean-deviation radius to use.
///
/// `Sum` adds the mean term and the deviation term. `AsWritten` subtracts
/// the deviation term; it is kept for auditing and can go negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MdRadius {
    #[default]
    Sum,
    AsWritten,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiskKind<T> {
    /// Conditional value-at-risk of the upper tail at level `alpha`.
    Cvar {
        alpha: T,
    },
    /// Mean plus `gamma` times the centered L_p norm.
    MeanDeviation {
        gamma: T,
        p: T,
        radius: MdRadius,
    },
    /// Smallest `kappa` with `E l(X - kappa) <= 0`.
    Shortfall {
        loss: LossFunction<T>,
    },
    Mean,
}

/// Constants the confidence radius needs. Only the ones the risk kind uses
/// must be present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs<T> {
    /// `M`: every cost lies in `[0, M]`.
    pub support_bound: T,
    /// `m(alpha)`: bound on the reciprocal density at the alpha-quantile.
    pub m_alpha: Option<T>,
    /// `M_l`: bound on `|l|` over `[-M, M]`.
    pub loss_bound: Option<T>,
    /// `M_G`: bound on the reciprocal slope of `kappa -> E l(X - kappa)` at the root.
    pub shortfall_sensitivity: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec<T> {
    pub kind: RiskKind<T>,
    pub bounds: BoundInputs<T>,
}

impl<T: Scalar> BoundInputs<T> {
    fn bare(support_bound: T) -> Self {
        Self {
            support_bound,
            m_alpha: None,
            loss_bound: None,
            shortfall_sensitivity: None,
        }
    }
}

impl<T: Scalar> RiskSpec<T> {
    pub fn cvar(alpha: T, support_bound: T) -> Result<Self> {
        Self::checked(RiskKind::Cvar { alpha }, BoundInputs::bare(support_bound))
    }

    pub fn mean_deviation(gamma: T, p: T, support_bound: T) -> Result<Self> {
        Self::checked(
            RiskKind::MeanDeviation {
                gamma,
                p,
                radius: MdRadius::Sum,
            },
            BoundInputs::bare(support_bound),
        )
    }

    /// Shortfall spec; `M_l` is filled in from the loss on `[-M, M]`.
    pub fn shortfall(loss: LossFunction<T>, support_bound: T) -> Result<Self> {
        let mut bounds = BoundInputs::bare(support_bound);
        check_support(support_bound)?;
        bounds.loss_bound = Some(loss.constants(support_bound)?.magnitude);
        Self::checked(RiskKind::Shortfall { loss }, bounds)
    }

    pub fn mean(support_bound: T) -> Result<Self> {
        Self::checked(RiskKind::Mean, BoundInputs::bare(support_bound))
    }

    pub fn with_m_alpha(mut self, m_alpha: T) -> Result<Self> {
        self.bounds.m_alpha = Some(m_alpha);
        self.validate().map(|_| self)
    }

    pub fn with_loss_bound(mut self, loss_bound: T) -> Result<Self> {
        self.bounds.loss_bound = Some(loss_bound);
        self.validate().map(|_| self)
    }

    pub fn with_shortfall_sensitivity(mut self, m_g: T) -> Result<Self> {
        self.bounds.shortfall_sensitivity = Some(m_g);
        self.validate().map(|_| self)
    }

    pub fn with_md_radius(mut self, variant: MdRadius) -> Self {
        if let RiskKind::MeanDeviation { radius, .. } = &mut self.kind {
            *radius = variant;
        }
        self
    }

    fn checked(kind: RiskKind<T>, bounds: BoundInputs<T>) -> Result<Self> {
        let spec = Self { kind, bounds };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks parameter ranges and that any constant present is positive.
    pub fn validate(&self) -> Result<()> {
        check_support(self.bounds.support_bound)?;
        match &self.kind {
            RiskKind::Cvar { alpha } => {
                if !(*alpha >= T::zero() && *alpha < T::one()) {
                    return Err(Error::param("alpha", format!("{alpha} not in [0, 1)")));
                }
            }
            RiskKind::MeanDeviation { gamma, p, .. } => {
                if !(*gamma >= T::zero() && gamma.is_finite()) {
                    return Err(Error::param("gamma", format!("{gamma} must be >= 0")));
                }
                check_exponent(*p)?;
            }
            RiskKind::Shortfall { .. } | RiskKind::Mean => {}
        }
        for (name, value) in [
            ("m_alpha", self.bounds.m_alpha),
            ("loss_bound", self.bounds.loss_bound),
            ("shortfall_sensitivity", self.bounds.shortfall_sensitivity),
        ] {
            if let Some(v) = value {
                if !(v > T::zero() && v.is_finite()) {
                    return Err(Error::param(name, format!("{v} must be finite and > 0")));
                }
            }
        }
        Ok(())
    }

    /// Short human-readable name, e.g. `CVaR(0.5)`.
    pub fn label(&self) -> String {
        match &self.kind {
            RiskKind::Cvar { alpha } => format!("CVaR({alpha})"),
            RiskKind::MeanDeviation { gamma, p, .. } => format!("MD({gamma},{p})"),
            RiskKind::Shortfall { loss } => match loss {
                LossFunction::Identity => "Shortfall(identity)".into(),
                LossFunction::ExpMinusOne => "Shortfall(exp)".into(),
                LossFunction::PiecewiseLinear(_) => "Shortfall(piecewise)".into(),
            },
            RiskKind::Mean => "Mean".into(),
        }
    }

    /// Confidence radius `eps(n, T_k(n), K, delta)` subtracted from the
    /// empirical risk to form the index.
    ///
    /// `n` is the current clock, `pulls` the arm's observation count and
    /// `num_arms` is `K`.
    pub fn confidence_radius(&self, n: u64, pulls: u64, num_arms: usize, delta: T) -> Result<T> {
        if n == 0 || pulls == 0 || pulls > n {
            return Err(Error::param(
                "pulls",
                format!("need 1 <= pulls <= n, got pulls = {pulls}, n = {n}"),
            ));
        }
        if num_arms == 0 {
            return Err(Error::param("num_arms", "need at least one arm"));
        }
        check_delta(delta)?;
        let m = self.bounds.support_bound;
        let nf = T::from_u64(n).expect("clock representable");
        let t = T::from_u64(pulls).expect("pull count representable");
        let k = T::count(num_arms);
        let two = T::lit(2.0);
        let log_term = |c: f64| (T::lit(c) * nf * nf * k / delta).ln();

        let radius = match &self.kind {
            RiskKind::Cvar { alpha } => {
                let m_alpha = self
                    .bounds
                    .m_alpha
                    .ok_or(Error::MissingConstant("m_alpha"))?;
                let inv = (T::one() - *alpha).recip();
                // (1 - 3 delta / n) only goes negative for n < 3 delta; clamp it.
                let tail = (T::one() - T::lit(3.0) * delta / nf).max(T::zero());
                let coef = inv * tail * m + two * (T::one() + inv) * m_alpha;
                coef * (log_term(2.0) / (two * t)).sqrt()
            }
            RiskKind::MeanDeviation { p, radius, .. } => {
                let l = log_term(4.0);
                let mean_part = m * (l / t).sqrt();
                let dev_part = m * root_real((*p + T::one()) * (l / (two * t)).sqrt(), *p);
                match radius {
                    MdRadius::Sum => mean_part + dev_part,
                    MdRadius::AsWritten => mean_part - dev_part,
                }
            }
            RiskKind::Shortfall { .. } => {
                let m_l = self
                    .bounds
                    .loss_bound
                    .ok_or(Error::MissingConstant("loss_bound"))?;
                let m_g = self
                    .bounds
                    .shortfall_sensitivity
                    .ok_or(Error::MissingConstant("shortfall_sensitivity"))?;
                two * m_l * m_g * (log_term(4.0) / (two * t)).sqrt()
            }
            RiskKind::Mean => m * (log_term(4.0) / (two * t)).sqrt(),
        };
        Ok(radius)
    }
}

fn check_support<T: Scalar>(m: T) -> Result<()> {
    if m > T::zero() && m.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "support_bound",
            format!("{m} must be finite and > 0"),
        ))
    }
}

pub(crate) fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta < T::one() {
        Ok(())
    } else {
        Err(Error::param("delta", format!("{delta} not in (0, 1)")))
    }
}

/// Plug-in CVaR: `q + (1 - alpha)^-1 * mean((x - q)_+)` with `q` the
/// empirical alpha-quantile.
pub fn empirical_cvar<T: Scalar>(buf: &SampleBuffer<T>, alpha: T) -> Result<T> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    check_level(alpha)?;
    if alpha >= T::one() {
        return Err(Error::param("alpha", "CVaR needs alpha < 1"));
    }
    let sorted = buf.sorted();
    let n = sorted.len();
    let rank = quantile_rank(n, alpha);
    let eta = sorted[rank - 1];
    let excess = sorted[rank..]
        .iter()
        .fold(T::zero(), |acc, &x| acc + (x - eta));
    Ok(eta + excess / (T::count(n) * (T::one() - alpha)))
}

/// Sample mean plus `gamma` times the empirical centered L_p norm.
pub fn empirical_md<T: Scalar>(buf: &SampleBuffer<T>, gamma: T, p: T) -> Result<T> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    check_exponent(p)?;
    let values = buf.values();
    let mean = mean_of(values);
    if gamma == T::zero() {
        return Ok(mean);
    }
    Ok(mean + gamma * root_real(p_moment_of(values, mean, p), p))
}

/// Empirical shortfall: the root in `kappa` of `(1/n) sum l(x_t - kappa) = 0`.
///
/// The objective is strictly decreasing in `kappa`, nonnegative at the sample
/// minimum and nonpositive at the sample maximum, so bisection on that
/// bracket always converges. `tol = 0` bisects to machine precision.
pub fn empirical_shortfall<T: Scalar>(
    buf: &SampleBuffer<T>,
    loss: &LossFunction<T>,
    tol: T,
) -> Result<T> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let values = buf.values();
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let objective = |kappa: T| {
        values
            .iter()
            .fold(T::zero(), |acc, &x| acc + loss.value(x - kappa))
    };
    bisect_nonincreasing(objective, lo, hi, tol, MAX_BISECTION_ITERS)
}

/// Dispatches to the estimator matching `spec`.
pub fn empirical_risk<T: Scalar>(buf: &SampleBuffer<T>, spec: &RiskSpec<T>) -> Result<T> {
    match &spec.kind {
        RiskKind::Cvar { alpha } => empirical_cvar(buf, *alpha),
        RiskKind::MeanDeviation { gamma, p, .. } => empirical_md(buf, *gamma, *p),
        RiskKind::Shortfall { loss } => empirical_shortfall(buf, loss, T::zero()),
        RiskKind::Mean => crate::empirical_stats::sample_mean(buf),
    }
}

/// Shortfall in closed form for losses whose root separates:
/// the sample mean for the identity loss and `ln(mean(e^x))` for the
/// exponential loss. `None` for piecewise-linear losses.
pub fn shortfall_closed_form<T: Scalar>(
    buf: &SampleBuffer<T>,
    loss: &LossFunction<T>,
) -> Option<T> {
    if buf.is_empty() {
        return None;
    }
    let values = buf.values();
    match loss {
        LossFunction::Identity => Some(mean_of(values)),
        LossFunction::ExpMinusOne => {
            let sum = values.iter().fold(T::zero(), |acc, &x| acc + x.exp());
            Some((sum / T::count(values.len())).ln())
        }
        LossFunction::PiecewiseLinear(_) => None,
    }
}
