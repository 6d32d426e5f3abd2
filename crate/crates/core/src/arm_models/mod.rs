//! Synthetic bounded-cost arms with exact distribution functions and
//! ground-truth risk oracles.
//!
//! Oracles use closed forms where they exist (uniform arms, discrete arms,
//! the mean and the exponential shortfall) and otherwise adaptive quadrature
//! plus bisection to an absolute tolerance of `1e-10` or better.

mod loss;

pub use loss::{LossConstants, LossFunction, PiecewiseLinear};

use rand::Rng;
use rand_distr::Distribution;
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::error::{Error, Result};
use crate::numeric::{bisect_nonincreasing, integrate_pieces, MAX_BISECTION_ITERS};
use crate::risk_measures::{RiskKind, RiskSpec};

/// Quadrature tolerance, two orders below the `1e-10` oracle accuracy target.
const QUAD_TOL: f64 = 1e-12;

/// Two arms whose oracle risks differ by less than this are a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmFamily {
    /// Point mass at `value`.
    Deterministic {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `scale * Beta(shape1, shape2)`.
    ScaledBeta {
        shape1: f64,
        shape2: f64,
        scale: f64,
    },
    /// `scale` with probability `p`, else 0.
    ScaledBernoulli {
        p: f64,
        scale: f64,
    },
}

/// A validated arm: a family together with the support bound `M`.
#[derive(Debug, Clone)]
pub struct ArmModel {
    family: ArmFamily,
    support_bound: f64,
    beta: Option<BetaParts>,
}

#[derive(Debug, Clone)]
struct BetaParts {
    exact: statrs::distribution::Beta,
    sampler: rand_distr::Beta<f64>,
}

impl PartialEq for ArmModel {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.support_bound == other.support_bound
    }
}

/// Per-arm oracle values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOracle {
    pub true_risk: f64,
    /// `1 / f(F^-1(alpha))`, CVaR only.
    pub density_floor_inv: Option<f64>,
    /// `1 / |G'(rho)|` with `G(kappa) = E l(X - kappa)`, shortfall only.
    pub shortfall_sensitivity: Option<f64>,
}

impl ArmModel {
    pub fn new(family: ArmFamily, support_bound: f64) -> Result<Self> {
        let m = support_bound;
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "support bound {m} must be finite and > 0"
            )));
        }
        let finite = |v: f64| v.is_finite();
        let beta = match family {
            ArmFamily::Deterministic { value } => {
                if !(finite(value) && (0.0..=m).contains(&value)) {
                    return Err(Error::InvalidModel(format!(
                        "point mass {value} not in [0, {m}]"
                    )));
                }
                None
            }
            ArmFamily::Uniform { low, high } => {
                if !(finite(low) && finite(high) && 0.0 <= low && low < high && high <= m) {
                    return Err(Error::InvalidModel(format!(
                        "uniform needs 0 <= low < high <= {m}, got [{low}, {high}]"
                    )));
                }
                None
            }
            ArmFamily::ScaledBeta {
                shape1,
                shape2,
                scale,
            } => {
                if !(finite(shape1) && finite(shape2) && shape1 > 0.0 && shape2 > 0.0) {
                    return Err(Error::InvalidModel(
                        "beta shapes must be finite and > 0".into(),
                    ));
                }
                if !(finite(scale) && scale > 0.0 && scale <= m) {
                    return Err(Error::InvalidModel(format!(
                        "beta scale {scale} not in (0, {m}]"
                    )));
                }
                let exact = statrs::distribution::Beta::new(shape1, shape2)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?;
                let sampler = rand_distr::Beta::new(shape1, shape2)
                    .map_err(|e| Error::InvalidModel(e.to_string()))?;
                Some(BetaParts { exact, sampler })
            }
            ArmFamily::ScaledBernoulli { p, scale } => {
                if !(finite(p) && (0.0..=1.0).contains(&p)) {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli p {p} not in [0, 1]"
                    )));
                }
                if !(finite(scale) && scale > 0.0 && scale <= m) {
                    return Err(Error::InvalidModel(format!(
                        "bernoulli scale {scale} not in (0, {m}]"
                    )));
                }
                None
            }
        };
        Ok(Self {
            family,
            support_bound,
            beta,
        })
    }

    pub fn deterministic(value: f64, support_bound: f64) -> Result<Self> {
        Self::new(ArmFamily::Deterministic { value }, support_bound)
    }

    pub fn uniform(low: f64, high: f64, support_bound: f64) -> Result<Self> {
        Self::new(ArmFamily::Uniform { low, high }, support_bound)
    }

    pub fn scaled_beta(shape1: f64, shape2: f64, scale: f64, support_bound: f64) -> Result<Self> {
        Self::new(
            ArmFamily::ScaledBeta {
                shape1,
                shape2,
                scale,
            },
            support_bound,
        )
    }

    pub fn scaled_bernoulli(p: f64, scale: f64, support_bound: f64) -> Result<Self> {
        Self::new(ArmFamily::ScaledBernoulli { p, scale }, support_bound)
    }

    pub fn family(&self) -> ArmFamily {
        self.family
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    /// True for the families with a continuous CDF (uniform and beta).
    pub fn has_continuous_cdf(&self) -> bool {
        matches!(
            self.family,
            ArmFamily::Uniform { .. } | ArmFamily::ScaledBeta { .. }
        )
    }

    /// Smallest interval holding all the mass.
    pub fn support(&self) -> (f64, f64) {
        match self.family {
            ArmFamily::Deterministic { value } => (value, value),
            ArmFamily::Uniform { low, high } => (low, high),
            ArmFamily::ScaledBeta { scale, .. } => (0.0, scale),
            ArmFamily::ScaledBernoulli { p, scale } => {
                if p == 0.0 {
                    (0.0, 0.0)
                } else if p == 1.0 {
                    (scale, scale)
                } else {
                    (0.0, scale)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            ArmFamily::Deterministic { value } => value,
            ArmFamily::Uniform { low, high } => {
                let u: f64 = rng.random();
                (low + (high - low) * u).min(high)
            }
            ArmFamily::ScaledBeta { scale, .. } => {
                let parts = self.beta.as_ref().expect("beta parts present");
                scale * parts.sampler.sample(rng)
            }
            ArmFamily::ScaledBernoulli { p, scale } => {
                let u: f64 = rng.random();
                if u < p {
                    scale
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            ArmFamily::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
            ArmFamily::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            ArmFamily::ScaledBeta { scale, .. } => {
                if x <= 0.0 {
                    0.0
                } else if x >= scale {
                    1.0
                } else {
                    self.beta_exact().cdf(x / scale).clamp(0.0, 1.0)
                }
            }
            ArmFamily::ScaledBernoulli { p, scale } => {
                if x < 0.0 {
                    0.0
                } else if x < scale {
                    1.0 - p
                } else {
                    1.0
                }
            }
        }
    }

    /// `inf { x : F(x) >= alpha }`; `alpha = 0` gives the infimum of the support.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("{alpha} not in [0, 1]")));
        }
        let (lo, hi) = self.support();
        Ok(match self.family {
            ArmFamily::Deterministic { value } => value,
            ArmFamily::Uniform { low, high } => (low + alpha * (high - low)).min(high),
            ArmFamily::ScaledBernoulli { p, scale } => {
                if alpha == 0.0 {
                    lo
                } else if alpha <= 1.0 - p {
                    0.0
                } else {
                    scale
                }
            }
            ArmFamily::ScaledBeta { .. } => {
                bisect_nonincreasing(|x| alpha - self.cdf(x), lo, hi, 0.0, MAX_BISECTION_ITERS)?
            }
        })
    }

    /// Density of a continuous arm; `None` for discrete arms.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self.family {
            ArmFamily::Uniform { low, high } => Some(if (low..=high).contains(&x) {
                1.0 / (high - low)
            } else {
                0.0
            }),
            ArmFamily::ScaledBeta { scale, .. } => {
                if !(0.0..=scale).contains(&x) {
                    return Some(0.0);
                }
                Some(self.beta_exact().pdf(x / scale) / scale)
            }
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            ArmFamily::Deterministic { value } => value,
            ArmFamily::Uniform { low, high } => 0.5 * (low + high),
            ArmFamily::ScaledBeta {
                shape1,
                shape2,
                scale,
            } => scale * shape1 / (shape1 + shape2),
            ArmFamily::ScaledBernoulli { p, scale } => p * scale,
        }
    }

    fn beta_exact(&self) -> &statrs::distribution::Beta {
        &self.beta.as_ref().expect("beta parts present").exact
    }

    /// Atoms `(x, weight)` of a discrete arm.
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self.family {
            ArmFamily::Deterministic { value } => Some(vec![(value, 1.0)]),
            ArmFamily::ScaledBernoulli { p, scale } => Some(vec![(0.0, 1.0 - p), (scale, p)]),
            _ => None,
        }
    }

    /// `E h(X)`. Continuous arms integrate by parts against the survival
    /// function, `h(lo) + int_lo^hi h'(x) (1 - F(x)) dx`, which stays bounded
    /// even where the density blows up; `kinks` lists where `h'` jumps.
    fn expect<H, D>(&self, h: H, h_prime: D, kinks: &[f64]) -> f64
    where
        H: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().map(|&(x, w)| w * h(x)).sum();
        }
        let (lo, hi) = self.support();
        let integrand = |x: f64| h_prime(x) * (1.0 - self.cdf(x));
        h(lo) + integrate_pieces(&integrand, lo, hi, kinks, QUAD_TOL)
    }

    /// `E |X - mean|^p`.
    fn centered_abs_moment(&self, p: f64) -> f64 {
        let mu = self.mean();
        if let Some(atoms) = self.atoms() {
            return atoms.iter().map(|&(x, w)| w * (x - mu).abs().powf(p)).sum();
        }
        if let ArmFamily::Uniform { low, high } = self.family {
            return (0.5 * (high - low)).powf(p) / (p + 1.0);
        }
        // E|X - mu|^p = int_0^R p t^(p-1) P(|X - mu| > t) dt
        let (lo, hi) = self.support();
        let reach = (mu - lo).max(hi - mu);
        let tail = |t: f64| {
            let weight = if p == 1.0 { 1.0 } else { p * t.powf(p - 1.0) };
            weight * ((1.0 - self.cdf(mu + t)) + self.cdf(mu - t))
        };
        integrate_pieces(&tail, 0.0, reach, &[mu - lo, hi - mu], QUAD_TOL)
    }

    /// `E[e^X]`.
    fn exp_moment(&self) -> f64 {
        match self.family {
            ArmFamily::Uniform { low, high } => (high.exp() - low.exp()) / (high - low),
            _ => self.expect(f64::exp, f64::exp, &[]),
        }
    }

    /// `G(kappa) = E l(X - kappa)`.
    fn shortfall_objective(&self, loss: &LossFunction<f64>, kappa: f64) -> f64 {
        let kinks: Vec<f64> = loss.kinks().iter().map(|b| b + kappa).collect();
        self.expect(
            |x| loss.value(x - kappa),
            |x| loss.derivative(x - kappa),
            &kinks,
        )
    }

    /// `E l'(X - kappa) = -G'(kappa)`.
    fn loss_slope_expectation(&self, loss: &LossFunction<f64>, kappa: f64) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms
                .iter()
                .map(|&(x, w)| w * loss.derivative(x - kappa))
                .sum();
        }
        match loss {
            LossFunction::Identity => 1.0,
            LossFunction::ExpMinusOne => (-kappa).exp() * self.exp_moment(),
            LossFunction::PiecewiseLinear(pl) => {
                // sum of slope * P(X - kappa in piece); F is continuous here.
                let bps = pl.breakpoints();
                pl.slopes()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let left = if i == 0 {
                            0.0
                        } else {
                            self.cdf(kappa + bps[i - 1])
                        };
                        let right = bps.get(i).map_or(1.0, |b| self.cdf(kappa + b));
                        s * (right - left)
                    })
                    .sum()
            }
        }
    }

    fn shortfall_risk(&self, loss: &LossFunction<f64>) -> Result<f64> {
        match loss {
            LossFunction::Identity => Ok(self.mean()),
            LossFunction::ExpMinusOne => Ok(self.exp_moment().ln()),
            LossFunction::PiecewiseLinear(_) => {
                let (lo, hi) = self.support();
                bisect_nonincreasing(
                    |k| self.shortfall_objective(loss, k),
                    lo,
                    hi,
                    1e-13,
                    MAX_BISECTION_ITERS,
                )
            }
        }
    }

    fn cvar_risk(&self, alpha: f64) -> Result<f64> {
        if !self.has_continuous_cdf() {
            return Err(Error::AssumptionViolated(format!(
                "CVaR oracle needs a continuous CDF; {:?} is discrete",
                self.family
            )));
        }
        if let ArmFamily::Uniform { low, high } = self.family {
            return Ok(low + (high - low) * 0.5 * (1.0 + alpha));
        }
        let eta = self.quantile(alpha)?;
        let (_, hi) = self.support();
        let excess = integrate_pieces(&|x| 1.0 - self.cdf(x), eta, hi, &[], QUAD_TOL);
        Ok(eta + excess / (1.0 - alpha))
    }

    /// Exact (or quadrature) value of the risk measure.
    pub fn true_risk(&self, spec: &RiskSpec<f64>) -> Result<f64> {
        spec.validate()?;
        match &spec.kind {
            RiskKind::Mean => Ok(self.mean()),
            RiskKind::Cvar { alpha } => self.cvar_risk(*alpha),
            RiskKind::MeanDeviation { gamma, p, .. } => {
                if *gamma == 0.0 {
                    return Ok(self.mean());
                }
                Ok(self.mean() + gamma * self.centered_abs_moment(*p).powf(p.recip()))
            }
            RiskKind::Shortfall { loss } => self.shortfall_risk(loss),
        }
    }

    /// `1 / f(F^-1(alpha))`.
    pub fn reciprocal_density_at_quantile(&self, alpha: f64) -> Result<f64> {
        let q = self.quantile(alpha)?;
        let f = self.density(q).ok_or_else(|| {
            Error::AssumptionViolated(format!("{:?} has no density", self.family))
        })?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::AssumptionViolated(format!(
                "density {f} at the {alpha}-quantile {q} is not positive and finite"
            )));
        }
        Ok(1.0 / f)
    }

    /// `1 / E l'(X - rho)` at the arm's shortfall risk `rho`.
    pub fn shortfall_sensitivity(&self, loss: &LossFunction<f64>, rho: f64) -> Result<f64> {
        let slope = self.loss_slope_expectation(loss, rho);
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::AssumptionViolated(format!(
                "shortfall objective has slope {slope} at its root"
            )));
        }
        Ok(1.0 / slope)
    }

    /// Oracle values of this arm under `spec`.
    pub fn oracle(&self, spec: &RiskSpec<f64>) -> Result<ArmOracle> {
        let true_risk = self.true_risk(spec)?;
        let density_floor_inv = match &spec.kind {
            RiskKind::Cvar { alpha } => Some(self.reciprocal_density_at_quantile(*alpha)?),
            _ => None,
        };
        let shortfall_sensitivity = match &spec.kind {
            RiskKind::Shortfall { loss } => Some(self.shortfall_sensitivity(loss, true_risk)?),
            _ => None,
        };
        Ok(ArmOracle {
            true_risk,
            density_floor_inv,
            shortfall_sensitivity,
        })
    }
}

/// Oracle values of a whole arm set under one risk measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConstants {
    pub per_arm: Vec<ArmOracle>,
    /// `Delta_k = rho_k - rho_{k*}`.
    pub gaps: Vec<f64>,
    pub means: Vec<f64>,
    /// Index of the unique optimal arm `k*` (0-based).
    pub optimal_arm: usize,
    /// `m(alpha) = max_k 1 / f_k(F_k^-1(alpha))` (CVaR).
    pub density_floor_inv: Option<f64>,
    /// `M_G = max_k 1 / |G_k'(rho_k)|` (shortfall).
    pub shortfall_sensitivity: Option<f64>,
    /// `C_l`, `m_l`, `M_l` on `[-M, M]` (shortfall).
    pub loss: Option<LossConstants<f64>>,
}

impl OracleConstants {
    pub fn true_risks(&self) -> Vec<f64> {
        self.per_arm.iter().map(|o| o.true_risk).collect()
    }

    pub fn optimal_risk(&self) -> f64 {
        self.per_arm[self.optimal_arm].true_risk
    }

    /// Fills in any bound constant `spec` is missing from the oracle values.
    pub fn complete_spec(&self, spec: &RiskSpec<f64>) -> Result<RiskSpec<f64>> {
        let mut out = spec.clone();
        if out.bounds.m_alpha.is_none() {
            out.bounds.m_alpha = self.density_floor_inv;
        }
        if out.bounds.shortfall_sensitivity.is_none() {
            out.bounds.shortfall_sensitivity = self.shortfall_sensitivity;
        }
        if out.bounds.loss_bound.is_none() {
            out.bounds.loss_bound = self.loss.map(|c| c.magnitude);
        }
        out.validate()?;
        Ok(out)
    }
}

/// Oracle values for `arms` under `spec`, including the optimal arm and gaps.
pub fn oracle_constants(arms: &[ArmModel], spec: &RiskSpec<f64>) -> Result<OracleConstants> {
    if arms.is_empty() {
        return Err(Error::BadConfig("no arms".into()));
    }
    let m = spec.bounds.support_bound;
    if let Some((k, _)) = arms.iter().enumerate().find(|(_, a)| a.support().1 > m) {
        return Err(Error::InvalidModel(format!(
            "arm {} has mass above the support bound {m}",
            k + 1
        )));
    }
    let per_arm = arms
        .iter()
        .map(|a| a.oracle(spec))
        .collect::<Result<Vec<_>>>()?;
    let risks: Vec<f64> = per_arm.iter().map(|o| o.true_risk).collect();
    let optimal_arm = unique_argmin(&risks)?;
    let best = risks[optimal_arm];
    let loss = match &spec.kind {
        RiskKind::Shortfall { loss } => Some(loss.constants(m)?),
        _ => None,
    };
    Ok(OracleConstants {
        gaps: risks.iter().map(|r| r - best).collect(),
        means: arms.iter().map(ArmModel::mean).collect(),
        optimal_arm,
        density_floor_inv: max_present(per_arm.iter().map(|o| o.density_floor_inv)),
        shortfall_sensitivity: max_present(per_arm.iter().map(|o| o.shortfall_sensitivity)),
        loss,
        per_arm,
    })
}

/// Largest value, or `None` if any arm lacks one.
fn max_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values
        .into_iter()
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
}

/// Index of the minimum, or [`Error::NonUniqueOptimum`] on a tie.
pub(crate) fn unique_argmin(risks: &[f64]) -> Result<usize> {
    let best = (0..risks.len())
        .min_by(|&a, &b| risks[a].total_cmp(&risks[b]))
        .ok_or_else(|| Error::BadConfig("no arms".into()))?;
    if let Some(other) =
        (0..risks.len()).find(|&k| k != best && (risks[k] - risks[best]).abs() < TIE_TOLERANCE)
    {
        let (first, second) = (best.min(other), best.max(other));
        return Err(Error::NonUniqueOptimum {
            first: first + 1,
            second: second + 1,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
