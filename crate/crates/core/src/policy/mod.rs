//! The risk-aware lower-confidence-bound index policy.
//!
//! After one round-robin pass over the arms, each step pulls the arm with
//! the smallest index `rho_hat_k - eps(n, T_k, K, delta)`, where `n` is the
//! number of pulls made so far. Ties go to the lowest arm. Arms are 0-based.

mod tracker;

use std::cell::Cell;

use crate::empirical_stats::SampleBuffer;
use crate::error::{Error, Result};
use crate::risk_measures::{check_delta, RiskSpec};
use crate::scalar::Scalar;

use tracker::RiskTracker;

#[derive(Debug)]
struct ArmHistory<T: Scalar> {
    samples: SampleBuffer<T>,
    tracker: RiskTracker<T>,
    cached_risk: Cell<Option<T>>,
}

impl<T: Scalar> Clone for ArmHistory<T> {
    fn clone(&self) -> Self {
        Self {
            samples: self.samples.clone(),
            tracker: self.tracker.clone(),
            cached_risk: self.cached_risk.clone(),
        }
    }
}

/// Observation histories, pull counts and clock of one policy run.
#[derive(Debug, Clone)]
pub struct PolicyState<T: Scalar> {
    spec: RiskSpec<T>,
    delta: T,
    arms: Vec<ArmHistory<T>>,
    clock: u64,
}

impl<T: Scalar> PolicyState<T> {
    /// Fresh state for `num_arms >= 2` arms and confidence level `delta`.
    ///
    /// Fails with [`Error::BadConfig`] on a bad arm count or level, and with
    /// [`Error::MissingConstant`] if `spec` lacks a constant its radius needs.
    pub fn new(num_arms: usize, spec: RiskSpec<T>, delta: T) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::BadConfig(format!(
                "need at least 2 arms, got {num_arms}"
            )));
        }
        if check_delta(delta).is_err() {
            return Err(Error::BadConfig(format!("delta {delta} not in (0, 1)")));
        }
        spec.validate()?;
        spec.confidence_radius(1, 1, num_arms, delta)?;
        let arms = (0..num_arms)
            .map(|_| ArmHistory {
                samples: SampleBuffer::new(),
                tracker: RiskTracker::for_spec(&spec),
                cached_risk: Cell::new(None),
            })
            .collect();
        Ok(Self {
            spec,
            delta,
            arms,
            clock: 0,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Total pulls so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn spec(&self) -> &RiskSpec<T> {
        &self.spec
    }

    /// `T_k(n)` for every arm.
    pub fn pulls(&self) -> Vec<u64> {
        self.arms.iter().map(|a| a.samples.len() as u64).collect()
    }

    pub fn history(&self, arm: usize) -> Result<&SampleBuffer<T>> {
        Ok(&self.arm(arm)?.samples)
    }

    fn arm(&self, arm: usize) -> Result<&ArmHistory<T>> {
        self.arms.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            arms: self.arms.len(),
        })
    }

    /// Empirical risk of one arm's history.
    pub fn empirical_risk(&self, arm: usize) -> Result<T> {
        let h = self.arm(arm)?;
        if h.samples.is_empty() {
            return Err(Error::NotInitialized { arm });
        }
        if let Some(r) = h.cached_risk.get() {
            return Ok(r);
        }
        let r = h.tracker.estimate(&h.samples, &self.spec)?;
        h.cached_risk.set(Some(r));
        Ok(r)
    }

    /// Lower confidence bound of one arm at the current clock.
    pub fn index(&self, arm: usize) -> Result<T> {
        let risk = self.empirical_risk(arm)?;
        let pulls = self.arms[arm].samples.len() as u64;
        let radius = self
            .spec
            .confidence_radius(self.clock, pulls, self.arms.len(), self.delta)?;
        Ok(risk - radius)
    }

    /// Arm to pull next.
    ///
    /// While `clock < K` this is arm `clock`. Afterwards it is the argmin of
    /// the indices; any arm that somehow has no observations is pulled first.
    pub fn select_arm(&self) -> Result<usize> {
        let k = self.arms.len();
        if (self.clock as usize) < k {
            return Ok(self.clock as usize);
        }
        if let Some(empty) = self.arms.iter().position(|a| a.samples.is_empty()) {
            return Ok(empty);
        }
        let mut best = (0, self.index(0)?);
        for arm in 1..k {
            let b = self.index(arm)?;
            if b < best.1 {
                best = (arm, b);
            }
        }
        Ok(best.0)
    }

    /// Records a cost observed on `arm`.
    pub fn update(&mut self, arm: usize, cost: T) -> Result<()> {
        let arms = self.arms.len();
        let bound = self.spec.bounds.support_bound;
        let h = self
            .arms
            .get_mut(arm)
            .ok_or(Error::ArmOutOfRange { arm, arms })?;
        if !(cost >= T::zero() && cost <= bound) {
            return Err(Error::CostOutOfRange {
                cost: cost.as_f64(),
                bound: bound.as_f64(),
            });
        }
        h.samples.push(cost);
        h.tracker.push(cost);
        h.cached_risk.set(None);
        self.clock += 1;
        Ok(())
    }
}
