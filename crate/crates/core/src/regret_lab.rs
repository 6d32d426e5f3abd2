//! Monte Carlo regret experiments: seeded episodes, pooled pseudo regret,
//! pull-count statistics, closed-form regret bounds and decay-rate fits.
//!
//! Replications run in parallel on the ambient rayon pool. Each one owns its
//! RNG, seeded from the base seed and its replication index, and results are
//! reduced in replication order, so output does not depend on the thread
//! count.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::arm_models::{oracle_constants, ArmModel, OracleConstants};
use crate::empirical_stats::SampleBuffer;
use crate::error::{Error, Result};
use crate::policy::PolicyState;
use crate::risk_measures::{check_delta, empirical_risk, RiskKind, RiskSpec};

/// One pull: 1-based time step, 0-based arm, observed cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: u64,
    pub arm: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn choices(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.arm)
    }
}

/// Which arm-selection rule drives an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyKind {
    /// The risk-aware lower-confidence-bound index policy.
    #[default]
    RaLcb,
    /// Every step picks an arm uniformly at random.
    UniformRandom,
    /// Always pulls the given arm.
    Fixed(usize),
}

/// Per-replication seed: SplitMix64 of the base seed offset by the index.
pub fn replication_seed(base_seed: u64, replication: u64) -> u64 {
    let mut z = base_seed.wrapping_add(
        replication
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_arms(arms: &[ArmModel], spec: &RiskSpec<f64>) -> Result<()> {
    if arms.len() < 2 {
        return Err(Error::BadConfig(format!(
            "need at least 2 arms, got {}",
            arms.len()
        )));
    }
    let m = spec.bounds.support_bound;
    if let Some(k) = arms.iter().position(|a| a.support().1 > m) {
        return Err(Error::InvalidModel(format!(
            "arm {} has mass above the support bound {m}",
            k + 1
        )));
    }
    Ok(())
}

/// Runs the index policy for `horizon` steps.
pub fn run_episode(
    arms: &[ArmModel],
    spec: &RiskSpec<f64>,
    delta: f64,
    horizon: u64,
    seed: u64,
) -> Result<EpisodeTrace> {
    run_episode_with(PolicyKind::RaLcb, arms, spec, delta, horizon, seed)
}

/// Runs `policy` for `horizon` steps. One RNG stream, seeded from `seed`,
/// feeds both the policy (if randomized) and the arms.
pub fn run_episode_with(
    policy: PolicyKind,
    arms: &[ArmModel],
    spec: &RiskSpec<f64>,
    delta: f64,
    horizon: u64,
    seed: u64,
) -> Result<EpisodeTrace> {
    check_arms(arms, spec)?;
    let k = arms.len();
    if horizon < k as u64 {
        return Err(Error::BadConfig(format!(
            "horizon {horizon} is shorter than the {k} initial pulls"
        )));
    }
    if let PolicyKind::Fixed(arm) = policy {
        if arm >= k {
            return Err(Error::ArmOutOfRange { arm, arms: k });
        }
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut state = match policy {
        PolicyKind::RaLcb => Some(PolicyState::new(k, spec.clone(), delta)?),
        _ => {
            check_delta(delta)?;
            None
        }
    };
    let mut steps = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let arm = match (&state, policy) {
            (Some(s), _) => s.select_arm()?,
            (None, PolicyKind::UniformRandom) => rng.random_range(0..k),
            (None, PolicyKind::Fixed(arm)) => arm,
            (None, PolicyKind::RaLcb) => unreachable!("index policy has a state"),
        };
        let cost = arms[arm].sample(&mut rng);
        if let Some(s) = state.as_mut() {
            s.update(arm, cost)?;
        }
        steps.push(Step { t, arm, cost });
    }
    Ok(EpisodeTrace { seed, steps })
}

/// `T_k(n)` for every arm over the whole trace.
pub fn pull_counts(trace: &EpisodeTrace, num_arms: usize) -> Vec<u64> {
    pull_counts_upto(trace, num_arms, trace.len())
}

fn pull_counts_upto(trace: &EpisodeTrace, num_arms: usize, n: usize) -> Vec<u64> {
    let mut counts = vec![0; num_arms];
    for s in &trace.steps[..n.min(trace.len())] {
        if let Some(c) = counts.get_mut(s.arm) {
            *c += 1;
        }
    }
    counts
}

/// Mean and standard error of the pseudo regret at horizon `n`.
pub fn pseudo_regret(
    arms: &[ArmModel],
    spec: &RiskSpec<f64>,
    delta: f64,
    n: u64,
    replications: usize,
    base_seed: u64,
) -> Result<(f64, f64)> {
    if replications < 2 {
        return Err(Error::BadConfig("need at least 2 replications".into()));
    }
    let outcome = Experiment::new(
        arms.to_vec(),
        spec.clone(),
        delta,
        vec![n],
        replications,
        base_seed,
    )
    .run()?;
    Ok((outcome.curve.regret_mean[0], outcome.curve.regret_se[0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub grid: Vec<u64>,
    pub regret_mean: Vec<f64>,
    pub regret_se: Vec<f64>,
    /// Closed-form bound at each horizon; `None` where no bound applies.
    pub bound: Vec<Option<f64>>,
    pub replications: usize,
}

/// A batch of independent episodes evaluated on a horizon grid.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub arms: Vec<ArmModel>,
    pub spec: RiskSpec<f64>,
    pub delta: f64,
    pub grid: Vec<u64>,
    pub replications: usize,
    pub base_seed: u64,
    pub policy: PolicyKind,
    /// Keep every episode trace in the outcome.
    pub keep_traces: bool,
}

/// What one replication contributes.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub seed: u64,
    /// Pooled empirical risk minus the optimal risk, per grid point.
    pub regret: Vec<f64>,
    /// `T_k(n)` per grid point.
    pub pulls: Vec<Vec<u64>>,
    pub trace: Option<EpisodeTrace>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub oracle: OracleConstants,
    /// The spec with every oracle-derivable constant filled in.
    pub spec: RiskSpec<f64>,
    pub curve: RegretCurve,
    pub replications: Vec<ReplicationOutcome>,
}

impl ExperimentOutcome {
    /// Mean of `T_k(n)` over replications, per grid point and arm.
    pub fn mean_pulls(&self) -> Vec<Vec<f64>> {
        let r = self.replications.len() as f64;
        (0..self.curve.grid.len())
            .map(|g| {
                let k = self.oracle.means.len();
                (0..k)
                    .map(|arm| {
                        self.replications
                            .iter()
                            .map(|rep| rep.pulls[g][arm] as f64)
                            .sum::<f64>()
                            / r
                    })
                    .collect()
            })
            .collect()
    }

    /// Risk-neutral regret `(1/n) sum_k E T_k(n) (mu_k - mu_k*)` per grid
    /// point, from the recorded pull counts.
    pub fn pull_count_regret(&self) -> Vec<f64> {
        let best = self.oracle.means[self.oracle.optimal_arm];
        self.mean_pulls()
            .iter()
            .zip(&self.curve.grid)
            .map(|(pulls, &n)| {
                pulls
                    .iter()
                    .zip(&self.oracle.means)
                    .map(|(t, mu)| t * (mu - best))
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }
}

impl Experiment {
    pub fn new(
        arms: Vec<ArmModel>,
        spec: RiskSpec<f64>,
        delta: f64,
        grid: Vec<u64>,
        replications: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            arms,
            spec,
            delta,
            grid,
            replications,
            base_seed,
            policy: PolicyKind::RaLcb,
            keep_traces: false,
        }
    }

    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_traces(mut self, keep: bool) -> Self {
        self.keep_traces = keep;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::BadConfig("horizon grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadConfig(
                "horizons must be strictly increasing".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::BadConfig("need at least 1 replication".into()));
        }
        check_arms(&self.arms, &self.spec)?;
        let k = self.arms.len() as u64;
        if self.grid[0] < k {
            return Err(Error::BadConfig(format!(
                "smallest horizon {} is shorter than the {k} initial pulls",
                self.grid[0]
            )));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<ExperimentOutcome> {
        self.validate()?;
        let oracle = oracle_constants(&self.arms, &self.spec)?;
        let spec = oracle.complete_spec(&self.spec)?;
        let optimal_risk = oracle.optimal_risk();
        let horizon = *self.grid.last().expect("grid is non-empty");

        let replications = (0..self.replications as u64)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(self.base_seed, rep);
                let trace =
                    run_episode_with(self.policy, &self.arms, &spec, self.delta, horizon, seed)?;
                let mut pooled = SampleBuffer::with_capacity(trace.len());
                let mut regret = Vec::with_capacity(self.grid.len());
                let mut pulls = Vec::with_capacity(self.grid.len());
                for &n in &self.grid {
                    for s in &trace.steps[pooled.len()..n as usize] {
                        pooled.push(s.cost);
                    }
                    regret.push(empirical_risk(&pooled, &spec)? - optimal_risk);
                    pulls.push(pull_counts_upto(&trace, self.arms.len(), n as usize));
                }
                Ok(ReplicationOutcome {
                    seed,
                    regret,
                    pulls,
                    trace: self.keep_traces.then_some(trace),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let (regret_mean, regret_se) = (0..self.grid.len())
            .map(|g| mean_and_se(replications.iter().map(|r| r.regret[g])))
            .unzip();
        let bound = self
            .grid
            .iter()
            .map(|&n| regret_bound(&spec, &oracle, self.arms.len(), self.delta, n))
            .collect();
        Ok(ExperimentOutcome {
            oracle,
            spec,
            curve: RegretCurve {
                grid: self.grid.clone(),
                regret_mean,
                regret_se,
                bound,
                replications: self.replications,
            },
            replications,
        })
    }
}

/// Mean and standard error, summed in iteration order.
fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (count, sum) = values
        .clone()
        .fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    let mean = sum / count as f64;
    if count < 2 {
        return (mean, 0.0);
    }
    let ss = values.fold(0.0, |acc, v| acc + (v - mean) * (v - mean));
    (mean, (ss / (count - 1) as f64 / count as f64).sqrt())
}

/// Problem size shared by the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundContext {
    pub n: u64,
    pub num_arms: usize,
    pub delta: f64,
    pub support_bound: f64,
}

impl BoundContext {
    fn validate(&self) -> Result<()> {
        if self.num_arms < 2 {
            return Err(Error::param("num_arms", "need at least 2 arms"));
        }
        if self.n == 0 {
            return Err(Error::param("n", "horizon must be positive"));
        }
        check_delta(self.delta)?;
        if !(self.support_bound > 0.0 && self.support_bound.is_finite()) {
            return Err(Error::param("support_bound", "must be finite and > 0"));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `ln(c n^2 K / delta)`.
    fn log_term(&self, c: f64) -> f64 {
        (c * self.nf() * self.nf() * self.num_arms as f64 / self.delta).ln()
    }
}

/// Positive gaps, i.e. the sub-optimal arms. Checks every gap is finite
/// and nonnegative.
fn suboptimal(gaps: &[f64]) -> Result<Vec<(usize, f64)>> {
    if gaps.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::param("gaps", "must be finite and >= 0"));
    }
    Ok(gaps
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, g)| g > 0.0)
        .collect())
}

/// Regret bound for CVaR at level `alpha`.
///
/// The `O(log n / n)` term of the quantile deviation is taken as the
/// sub-optimal pull budget `sum_k M_k(n) / n`.
pub fn bound_cvar(ctx: BoundContext, alpha: f64, m_alpha: f64, gaps: &[f64]) -> Result<f64> {
    ctx.validate()?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} not in [0, 1)")));
    }
    if !(m_alpha > 0.0 && m_alpha.is_finite()) {
        return Err(Error::param("m_alpha", "must be finite and > 0"));
    }
    let (n, m, delta) = (ctx.nf(), ctx.support_bound, ctx.delta);
    let inv = 1.0 / (1.0 - alpha);
    let c = 2.0 * (1.0 + inv) * m_alpha + inv * m;
    let shift = inv * 4.0 * delta / (n * n * ctx.num_arms as f64) * m;
    let log2 = ctx.log_term(2.0);
    let mut budget = 0.0;
    let mut weighted = 0.0;
    let sub = suboptimal(gaps)?;
    for &(k, gap) in &sub {
        let denom = gap - shift;
        if denom <= 0.0 {
            return Err(Error::DegenerateGap { arm: k + 1 });
        }
        let pulls = 2.0 * log2 * (c / denom).powi(2) + 3.0 * delta;
        budget += pulls;
        weighted += pulls * (m + gap);
    }
    let gap_max = sub.iter().map(|&(_, g)| g).fold(0.0, f64::max);
    let quantile_dev = alpha.max(1.0 - alpha) * (budget / n) * m_alpha
        + 2.0 * m_alpha * ((4.0 * n / delta).ln() / (2.0 * n)).sqrt();
    let tail = 4.0 * delta / n;
    Ok((1.0 - tail) * (quantile_dev + inv * weighted / n)
        + tail * ((inv + 1.0) * m + inv * gap_max))
}

/// Regret bound for mean deviation `mean + gamma * ||X - mean||_p`.
///
/// `gaps` are risk gaps and set the pull budget; `mean_gaps` are the
/// differences of means, the largest of which prices a sub-optimal pull.
pub fn bound_md(
    ctx: BoundContext,
    p: f64,
    gamma: f64,
    gaps: &[f64],
    mean_gaps: &[f64],
) -> Result<f64> {
    ctx.validate()?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::param("p", format!("{p} must be >= 1")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("{gamma} must be >= 0")));
    }
    let (n, m, delta) = (ctx.nf(), ctx.support_bound, ctx.delta);
    let log4 = ctx.log_term(4.0);
    let sub = suboptimal(gaps)?;
    let n_phi = sub
        .iter()
        .map(|&(_, gap)| (1.0 - delta / n) * md_pull_factor(gap, m, p) * log4)
        .sum::<f64>()
        + (ctx.num_arms as f64 - 1.0) * delta;
    let mean_gap_max = mean_gaps.iter().map(|g| g.abs()).fold(0.0, f64::max);
    // |mean of the optimal arm's samples - its mean| / M never exceeds 1.
    let mean_dev = if n > n_phi {
        (log4 / (2.0 * (n - n_phi))).sqrt().min(1.0)
    } else {
        1.0
    };
    Ok((mean_gap_max + 2.0 * gamma * p * m.powf(p)) * n_phi / n
        + m * (delta / n + (1.0 - delta / n) * mean_dev))
}

/// `min{1, g / c, (g / c)^p}^-2` with `c = 2M[1 + (1+p)^(1/p)]`.
fn md_pull_factor(gap: f64, m: f64, p: f64) -> f64 {
    let ratio = gap / (2.0 * m * (1.0 + (1.0 + p).powf(1.0 / p)));
    let floor = 1.0_f64.min(ratio).min(ratio.powf(p));
    floor.powi(-2)
}

/// Loss constants the shortfall bound needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortfallConstants {
    /// `M_l`
    pub loss_bound: f64,
    /// `m_l`
    pub derivative_floor: f64,
    /// `M_G`
    pub sensitivity: f64,
}

/// Regret bound for the shortfall risk, with `t_star` standing in for the
/// optimal arm's pull count.
pub fn bound_shortfall(
    ctx: BoundContext,
    c: ShortfallConstants,
    gaps: &[f64],
    t_star: f64,
) -> Result<f64> {
    ctx.validate()?;
    for (name, v) in [
        ("loss_bound", c.loss_bound),
        ("derivative_floor", c.derivative_floor),
        ("sensitivity", c.sensitivity),
        ("t_star", t_star),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("{v} must be finite and > 0")));
        }
    }
    let (n, m, delta) = (ctx.nf(), ctx.support_bound, ctx.delta);
    let log4 = ctx.log_term(4.0);
    let (ml, mg) = (c.loss_bound, c.sensitivity);
    let sub_sum: f64 = suboptimal(gaps)?
        .iter()
        .map(|&(_, gap)| 8.0 * ml * ml * mg / (n * c.derivative_floor * gap) * log4)
        .sum();
    let dominant = 2.0 * ml * mg * (log4 / (2.0 * t_star)).sqrt();
    Ok((1.0 - delta / n) * (sub_sum + dominant) + delta / n * m)
}

/// Deterministic stand-in for `T_k*(n)`: `n` minus each sub-optimal arm's
/// pull budget `ceil(8 M_l M_G ln(4 n^2 K / delta) / gap)`, floored at 1.
pub fn shortfall_t_star(
    ctx: BoundContext,
    loss_bound: f64,
    sensitivity: f64,
    gaps: &[f64],
) -> Result<f64> {
    ctx.validate()?;
    let log4 = ctx.log_term(4.0);
    let budget: f64 = suboptimal(gaps)?
        .iter()
        .map(|&(_, gap)| (8.0 * loss_bound * sensitivity * log4 / gap).ceil())
        .sum();
    Ok((ctx.nf() - budget).max(1.0))
}

/// Bound matching `spec` at horizon `n`; `None` for the mean (no bound is
/// provided) or when the CVaR bound is degenerate at this `n`.
pub fn regret_bound(
    spec: &RiskSpec<f64>,
    oracle: &OracleConstants,
    num_arms: usize,
    delta: f64,
    n: u64,
) -> Option<f64> {
    let ctx = BoundContext {
        n,
        num_arms,
        delta,
        support_bound: spec.bounds.support_bound,
    };
    let best_mean = oracle.means[oracle.optimal_arm];
    match &spec.kind {
        RiskKind::Mean => None,
        RiskKind::Cvar { alpha } => {
            bound_cvar(ctx, *alpha, spec.bounds.m_alpha?, &oracle.gaps).ok()
        }
        RiskKind::MeanDeviation { gamma, p, .. } => {
            let mean_gaps: Vec<f64> = oracle.means.iter().map(|mu| mu - best_mean).collect();
            bound_md(ctx, *p, *gamma, &oracle.gaps, &mean_gaps).ok()
        }
        RiskKind::Shortfall { .. } => {
            let constants = ShortfallConstants {
                loss_bound: spec.bounds.loss_bound?,
                derivative_floor: oracle.loss?.derivative_floor,
                sensitivity: spec.bounds.shortfall_sensitivity?,
            };
            let t_star = shortfall_t_star(
                ctx,
                constants.loss_bound,
                constants.sensitivity,
                &oracle.gaps,
            )
            .ok()?;
            bound_shortfall(ctx, constants, &oracle.gaps, t_star).ok()
        }
    }
}

/// Least-squares slope of `ln(regret_mean)` against `ln(n)`.
pub fn decay_exponent(curve: &RegretCurve) -> Result<f64> {
    fit_decay(&curve.grid, &curve.regret_mean)
}

pub(crate) fn fit_decay(grid: &[u64], values: &[f64]) -> Result<f64> {
    if grid.len() < 3 || grid.len() != values.len() {
        return Err(Error::BadConfig(
            "decay fit needs at least 3 grid points".into(),
        ));
    }
    if let Some(i) = values.iter().position(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::NonPositiveRegret { n: grid[i] });
    }
    let xs: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let count = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / count;
    let y_bar = ys.iter().sum::<f64>() / count;
    let (sxy, sxx) = xs.iter().zip(&ys).fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (
            sxy + (x - x_bar) * (y - y_bar),
            sxx + (x - x_bar) * (x - x_bar),
        )
    });
    Ok(sxy / sxx)
}

/// Two uniform arms used as the reference instance: arm 1 on `[0.5, 1]`,
/// arm 2 (optimal under every supported measure) on `[0, 0.5]`. `M = 1`.
pub fn canonical_arms() -> Vec<ArmModel> {
    vec![
        ArmModel::uniform(0.5, 1.0, 1.0).expect("valid arm"),
        ArmModel::uniform(0.0, 0.5, 1.0).expect("valid arm"),
    ]
}

#[cfg(test)]
mod tests;
