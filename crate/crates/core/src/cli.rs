//! JSON experiment configs and the `run` / `oracle` commands.
//!
//! A config looks like
//!
//! ```json
//! {
//!   "arms": [
//!     {"family": "uniform", "low": 0.5, "high": 1.0},
//!     {"family": "uniform", "low": 0.0, "high": 0.5}
//!   ],
//!   "risk": {"kind": "cvar", "alpha": 0.5},
//!   "horizons": [1000, 4000, 16000],
//!   "seed": 7
//! }
//! ```
//!
//! Defaults: `support_bound` 1, `delta` 0.1, `replications` 100, `seed` 0,
//! `md_radius_variant` `"sum"`, outputs `trace.csv` and `curve.csv`. Unknown
//! keys are rejected. Constants the confidence radius needs (`m_alpha`,
//! `loss_bound`, `shortfall_sensitivity`) are derived from the arms when
//! omitted.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::arm_models::{oracle_constants, ArmFamily, ArmModel, LossFunction, PiecewiseLinear};
use crate::error::Error;
use crate::regret_lab::{fit_decay, Experiment, ExperimentOutcome};
use crate::risk_measures::{MdRadius, RiskKind, RiskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmConfig {
    Deterministic {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    ScaledBeta {
        shape1: f64,
        shape2: f64,
        scale: f64,
    },
    ScaledBernoulli {
        p: f64,
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Identity,
    ExpMinusOne,
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskConfig {
    Cvar {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m_alpha: Option<f64>,
    },
    Md {
        gamma: f64,
        p: f64,
    },
    Shortfall {
        loss: LossConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loss_bound: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shortfall_sensitivity: Option<f64>,
    },
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdRadiusConfig {
    #[default]
    Sum,
    AsWritten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_trace")]
    pub trace: PathBuf,
    #[serde(default = "default_curve")]
    pub curve: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            curve: default_curve(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arms: Vec<ArmConfig>,
    #[serde(default = "default_support_bound")]
    pub support_bound: f64,
    pub risk: RiskConfig,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub horizons: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub md_radius_variant: MdRadiusConfig,
}

fn default_trace() -> PathBuf {
    "trace.csv".into()
}

fn default_curve() -> PathBuf {
    "curve.csv".into()
}

fn default_support_bound() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.1
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Validation {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Experiment(#[from] Error),
    #[error("cannot {action} `{}`: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Parses and validates a config, filling in derivable constants.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    config.validate()?;
    config.fill_constants()?;
    Ok(config)
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        action: "read",
        path: path.to_owned(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn arm_models(&self) -> Result<Vec<ArmModel>, ConfigError> {
        self.arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let family = match *arm {
                    ArmConfig::Deterministic { value } => ArmFamily::Deterministic { value },
                    ArmConfig::Uniform { low, high } => ArmFamily::Uniform { low, high },
                    ArmConfig::ScaledBeta {
                        shape1,
                        shape2,
                        scale,
                    } => ArmFamily::ScaledBeta {
                        shape1,
                        shape2,
                        scale,
                    },
                    ArmConfig::ScaledBernoulli { p, scale } => {
                        ArmFamily::ScaledBernoulli { p, scale }
                    }
                };
                ArmModel::new(family, self.support_bound)
                    .map_err(|e| ConfigError::field(format!("arms[{i}]"), e))
            })
            .collect()
    }

    /// The risk spec with whatever constants the config states.
    pub fn risk_spec(&self) -> Result<RiskSpec<f64>, ConfigError> {
        let m = self.support_bound;
        let as_field = |e: Error| match e {
            Error::InvalidParameter {
                name: "support_bound",
                reason,
            } => ConfigError::field("support_bound", reason),
            Error::InvalidParameter { name, reason } => {
                ConfigError::field(format!("risk.{name}"), reason)
            }
            other => ConfigError::field("risk", other),
        };
        let spec = match &self.risk {
            RiskConfig::Cvar { alpha, m_alpha } => {
                let spec = RiskSpec::cvar(*alpha, m).map_err(as_field)?;
                match m_alpha {
                    Some(v) => spec.with_m_alpha(*v).map_err(as_field)?,
                    None => spec,
                }
            }
            RiskConfig::Md { gamma, p } => RiskSpec::mean_deviation(*gamma, *p, m)
                .map_err(as_field)?
                .with_md_radius(match self.md_radius_variant {
                    MdRadiusConfig::Sum => MdRadius::Sum,
                    MdRadiusConfig::AsWritten => MdRadius::AsWritten,
                }),
            RiskConfig::Shortfall {
                loss,
                loss_bound,
                shortfall_sensitivity,
            } => {
                let loss = match loss {
                    LossConfig::Identity => LossFunction::Identity,
                    LossConfig::ExpMinusOne => LossFunction::ExpMinusOne,
                    LossConfig::PiecewiseLinear {
                        breakpoints,
                        slopes,
                    } => LossFunction::PiecewiseLinear(
                        PiecewiseLinear::new(breakpoints.clone(), slopes.clone()).map_err(|e| {
                            match e {
                                Error::InvalidParameter { name, reason } => {
                                    ConfigError::field(format!("risk.loss.{name}"), reason)
                                }
                                other => ConfigError::field("risk.loss", other),
                            }
                        })?,
                    ),
                };
                let mut spec = RiskSpec::shortfall(loss, m).map_err(as_field)?;
                if let Some(v) = loss_bound {
                    spec = spec.with_loss_bound(*v).map_err(as_field)?;
                }
                if let Some(v) = shortfall_sensitivity {
                    spec = spec.with_shortfall_sensitivity(*v).map_err(as_field)?;
                }
                spec
            }
            RiskConfig::Mean => RiskSpec::mean(m).map_err(as_field)?,
        };
        Ok(spec)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.arms.len() < 2 {
            return Err(ConfigError::field("arms", "need at least 2 arms"));
        }
        self.arm_models()?;
        self.risk_spec()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::field(
                "delta",
                format!("{} not in (0, 1)", self.delta),
            ));
        }
        if self.horizons.is_empty() {
            return Err(ConfigError::field("horizons", "must not be empty"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::field(
                "horizons",
                "must be strictly increasing",
            ));
        }
        if self.horizons[0] < self.arms.len() as u64 {
            return Err(ConfigError::field(
                "horizons",
                "every horizon must cover one pull of each arm",
            ));
        }
        if self.replications == 0 {
            return Err(ConfigError::field("replications", "must be at least 1"));
        }
        for (field, path) in [
            ("output.trace", &self.output.trace),
            ("output.curve", &self.output.curve),
        ] {
            if path.as_os_str().is_empty() {
                return Err(ConfigError::field(field, "must not be empty"));
            }
        }
        if self.output.trace == self.output.curve {
            return Err(ConfigError::field(
                "output.curve",
                "must differ from output.trace",
            ));
        }
        Ok(())
    }

    /// Fills `m_alpha`, `loss_bound` and `shortfall_sensitivity` from the arms
    /// when the config leaves them out.
    fn fill_constants(&mut self) -> Result<(), ConfigError> {
        let arms = self.arm_models()?;
        let spec = self.risk_spec()?;
        let derive = |field: &str, values: Result<Vec<f64>, Error>| {
            values
                .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
                .map_err(|e| {
                    ConfigError::field(
                        field,
                        format!("not given and not derivable from the arms: {e}"),
                    )
                })
        };
        match &mut self.risk {
            RiskConfig::Cvar { alpha, m_alpha } if m_alpha.is_none() => {
                let values = arms
                    .iter()
                    .map(|a| a.reciprocal_density_at_quantile(*alpha))
                    .collect();
                *m_alpha = Some(derive("risk.m_alpha", values)?);
            }
            RiskConfig::Shortfall {
                loss_bound,
                shortfall_sensitivity,
                ..
            } => {
                if loss_bound.is_none() {
                    *loss_bound = spec.bounds.loss_bound;
                }
                if shortfall_sensitivity.is_none() {
                    let values = arms
                        .iter()
                        .map(|a| {
                            a.oracle(&spec)
                                .map(|o| o.shortfall_sensitivity.unwrap_or(0.0))
                        })
                        .collect();
                    *shortfall_sensitivity = Some(derive("risk.shortfall_sensitivity", values)?);
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn experiment(&self) -> Result<Experiment, ConfigError> {
        Ok(Experiment::new(
            self.arm_models()?,
            self.risk_spec()?,
            self.delta,
            self.horizons.clone(),
            self.replications,
            self.seed,
        ))
    }
}

/// Locale-independent number with 12 significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn trace_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("replication,t,arm,cost\n");
    for (r, rep) in outcome.replications.iter().enumerate() {
        let trace = rep.trace.as_ref().expect("traces were kept");
        for s in &trace.steps {
            writeln!(out, "{},{},{},{}", r + 1, s.t, s.arm + 1, num(s.cost))
                .expect("write to string");
        }
    }
    out
}

fn curve_csv(outcome: &ExperimentOutcome) -> String {
    let curve = &outcome.curve;
    let k = outcome.oracle.means.len();
    let mut out = String::from("n,regret_mean,regret_se,bound,decay_exponent");
    for arm in 1..=k {
        write!(out, ",mean_pulls_arm{arm}").expect("write to string");
    }
    out.push('\n');
    let pulls = outcome.mean_pulls();
    for (i, &n) in curve.grid.iter().enumerate() {
        let bound = curve.bound[i].map(num).unwrap_or_default();
        let decay = if i >= 2 {
            fit_decay(&curve.grid[..=i], &curve.regret_mean[..=i])
                .map(num)
                .unwrap_or_default()
        } else {
            String::new()
        };
        write!(
            out,
            "{n},{},{},{bound},{decay}",
            num(curve.regret_mean[i]),
            num(curve.regret_se[i])
        )
        .expect("write to string");
        for p in &pulls[i] {
            write!(out, ",{}", num(*p)).expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        action: "write",
        path: path.to_owned(),
        source,
    })
}

fn summary_table(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let curve = &outcome.curve;
    let mut out = String::new();
    writeln!(
        out,
        "{} on {} arms, delta = {}, R = {}, optimal arm {}",
        outcome.spec.label(),
        config.arms.len(),
        config.delta,
        curve.replications,
        outcome.oracle.optimal_arm + 1
    )
    .expect("write to string");
    writeln!(
        out,
        "{:>10} {:>14} {:>14} {:>14}",
        "n", "regret", "std err", "bound"
    )
    .expect("write to string");
    for (i, n) in curve.grid.iter().enumerate() {
        let bound = curve.bound[i].map_or_else(|| "-".to_string(), |b| format!("{b:.6}"));
        writeln!(
            out,
            "{n:>10} {:>14.6} {:>14.6} {bound:>14}",
            curve.regret_mean[i], curve.regret_se[i]
        )
        .expect("write to string");
    }
    out
}

/// Runs the experiment and writes both CSVs below `out_dir`. Returns the
/// summary table.
pub fn cmd_run(
    config: &ExperimentConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<String, CliError> {
    let experiment = config.experiment()?.with_traces(true);
    let outcome = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::BadConfig(format!("cannot start {n} threads: {e}")))?
            .install(|| experiment.run())?,
        None => experiment.run()?,
    };
    write_file(&out_dir.join(&config.output.trace), &trace_csv(&outcome))?;
    write_file(&out_dir.join(&config.output.curve), &curve_csv(&outcome))?;
    Ok(summary_table(config, &outcome))
}

/// Oracle report: per-arm risks and gaps, derived constants and `k*`.
pub fn cmd_oracle(config: &ExperimentConfig) -> Result<String, CliError> {
    let arms = config.arm_models()?;
    let spec = config.risk_spec()?;
    let oracle = oracle_constants(&arms, &spec)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.12}"));
    let mut out = String::new();
    writeln!(out, "risk measure: {}", spec.label()).expect("write to string");
    writeln!(
        out,
        "{:>4} {:>16} {:>16} {:>16}",
        "arm", "risk", "gap", "mean"
    )
    .expect("write to string");
    for (k, o) in oracle.per_arm.iter().enumerate() {
        writeln!(
            out,
            "{:>4} {:>16.12} {:>16.12} {:>16.12}",
            k + 1,
            o.true_risk,
            oracle.gaps[k],
            oracle.means[k]
        )
        .expect("write to string");
    }
    writeln!(out, "optimal arm: {}", oracle.optimal_arm + 1).expect("write to string");
    if let RiskKind::Cvar { .. } = spec.kind {
        writeln!(out, "m(alpha): {}", opt(oracle.density_floor_inv)).expect("write to string");
    }
    if let RiskKind::Shortfall { .. } = spec.kind {
        let loss = oracle.loss;
        writeln!(out, "M_G: {}", opt(oracle.shortfall_sensitivity)).expect("write to string");
        writeln!(out, "M_l: {}", opt(loss.map(|c| c.magnitude))).expect("write to string");
        writeln!(out, "m_l: {}", opt(loss.map(|c| c.derivative_floor))).expect("write to string");
        writeln!(out, "C_l: {}", opt(loss.map(|c| c.lipschitz))).expect("write to string");
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "riskbandit", version, about = "Risk-averse bandit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded experiment and write the trace and curve CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory the output paths are resolved against.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core).
        #[arg(long, env = "RISKBANDIT_THREADS")]
        threads: Option<usize>,
    },
    /// Print oracle risks, gaps and derived constants.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Executes a parsed command line; the text is what should go to stdout.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run {
            config,
            out_dir,
            seed,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cmd_run(&cfg, &out_dir, threads)
        }
        Command::Oracle { config } => cmd_oracle(&load_config(&config)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "arms": [
            {"family": "uniform", "low": 0.5, "high": 1.0},
            {"family": "uniform", "low": 0.0, "high": 0.5}
        ],
        "risk": {"kind": "cvar", "alpha": 0.5},
        "horizons": [10]
    }"#;

    #[test]
    fn defaults_and_derived_m_alpha() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.replications, 100);
        assert_eq!(c.md_radius_variant, MdRadiusConfig::Sum);
        assert_eq!(c.output, OutputConfig::default());
        assert_eq!(
            c.risk,
            RiskConfig::Cvar {
                alpha: 0.5,
                m_alpha: Some(0.5)
            }
        );
    }

    #[test]
    fn round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
        let sf = MINIMAL.replace(
            r#"{"kind": "cvar", "alpha": 0.5}"#,
            r#"{"kind": "shortfall", "loss": {"type": "piecewise_linear", "breakpoints": [0.0], "slopes": [0.5, 2.0]}}"#,
        );
        let c = parse_config(&sf).unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn bad_alpha_names_the_field() {
        let text = MINIMAL.replace("\"alpha\": 0.5", "\"alpha\": 1.2");
        match parse_config(&text).unwrap_err() {
            ConfigError::Validation { field, .. } => assert_eq!(field, "risk.alpha"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let text = MINIMAL.replace("\"alpha\": 0.5", "\"alpha\": 0.5, \"m_alhpa\": 1");
        match parse_config(&text).unwrap_err() {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 6);
                assert!(message.contains("m_alhpa"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
        let text = MINIMAL.replace("\"horizons\"", "\"horizon\"");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn other_validation_fields() {
        let field = |text: &str| match parse_config(text).unwrap_err() {
            ConfigError::Validation { field, .. } => field,
            e => panic!("unexpected {e}"),
        };
        assert_eq!(field(&MINIMAL.replace("[10]", "[10, 10]")), "horizons");
        assert_eq!(
            field(&MINIMAL.replace("\"high\": 1.0", "\"high\": 1.5")),
            "arms[0]"
        );
        assert_eq!(
            field(&MINIMAL.replace("\"horizons\"", "\"delta\": 1.0, \"horizons\"")),
            "delta"
        );
        let discrete = MINIMAL.replace(
            r#"{"family": "uniform", "low": 0.0, "high": 0.5}"#,
            r#"{"family": "scaled_bernoulli", "p": 0.2, "scale": 1.0}"#,
        );
        assert_eq!(field(&discrete), "risk.m_alpha");
    }

    #[test]
    fn curve_and_trace_layout() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.replications = 2;
        let outcome = c.experiment().unwrap().with_traces(true).run().unwrap();
        let trace = trace_csv(&outcome);
        assert_eq!(trace.lines().count(), 1 + 20);
        assert!(trace.lines().nth(1).unwrap().starts_with("1,1,1,"));
        let curve = curve_csv(&outcome);
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(
            lines[0],
            "n,regret_mean,regret_se,bound,decay_exponent,mean_pulls_arm1,mean_pulls_arm2"
        );
        assert!(lines[1].starts_with("10,"));
        assert!(!curve.contains('\r'));
    }

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(num(0.75), "7.50000000000e-1");
        assert_eq!(num(-1234.5), "-1.23450000000e3");
    }
}
