//! Risk-averse stochastic bandits: empirical risk estimators, the
//! risk-aware lower-confidence-bound policy, and a regret laboratory.
//!
//! Estimators and the policy are generic over [`Scalar`] (`f32` or `f64`).
//! Arm models, oracles and the simulation harness work in `f64`.

pub mod arm_models;
pub mod cli;
pub mod empirical_stats;
pub mod error;
mod numeric;
pub mod policy;
pub mod regret_lab;
pub mod risk_measures;
pub mod scalar;

pub use arm_models::{oracle_constants, ArmFamily, ArmModel, LossFunction, OracleConstants};
pub use empirical_stats::SampleBuffer;
pub use error::{Error, Result};
pub use policy::PolicyState;
pub use risk_measures::{empirical_risk, MdRadius, RiskKind, RiskSpec};
pub use scalar::Scalar;

pub type SampleBuffer64 = SampleBuffer<f64>;
pub type SampleBuffer32 = SampleBuffer<f32>;
pub type RiskSpec64 = RiskSpec<f64>;
pub type RiskSpec32 = RiskSpec<f32>;
pub type PolicyState64 = PolicyState<f64>;
pub type PolicyState32 = PolicyState<f32>;
pub type LossFunction64 = LossFunction<f64>;
pub type LossFunction32 = LossFunction<f32>;
