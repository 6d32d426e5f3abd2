use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the models, estimators, policy and experiment runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample buffer is empty")]
    EmptyBuffer,

    #[error("invalid arm model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("root finder did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("risk specification lacks required constant `{0}`")]
    MissingConstant(&'static str),

    #[error("bad policy configuration: {0}")]
    BadConfig(String),

    #[error("arm {arm} has no observations yet")]
    NotInitialized { arm: usize },

    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("cost {cost} outside the support [0, {bound}]")]
    CostOutOfRange { cost: f64, bound: f64 },

    #[error("optimal arm is not unique: arms {first} and {second} have equal risk")]
    NonUniqueOptimum { first: usize, second: usize },

    #[error("bound is degenerate for arm {arm}: gap does not exceed the correction term")]
    DegenerateGap { arm: usize },

    #[error("regret curve has a non-positive mean at n = {n}")]
    NonPositiveRegret { n: u64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
