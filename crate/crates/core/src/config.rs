//! Experiment configuration files and the runner behind `fpl run`.
//!
//! A config is TOML with a mandatory schema string:
//!
//! ```toml
//! schema = "fpl-experiment/1"
//!
//! [pool]
//! kind = "uniform"
//! n = 2
//!
//! [schedule]
//! kind = "dynamic-kt"
//! k = 0.6931471805599453
//!
//! [environment]
//! kind = "fl-killer"
//!
//! [run]
//! horizon = 10000
//! replicas = 200
//! seed = 7
//! bounds = ["dynamic-kt"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environments::EnvironmentSpec;
use crate::error::{FplError, Result};
use crate::harness::bounds::{check_hypotheses, evaluate_bound, BoundKind, BoundReport, Direction, MC_SIGMAS};
use crate::harness::coverage::{high_probability_check, ratio_convergence_check};
use crate::harness::output::{write_trace_file, ExperimentReport};
use crate::harness::stats::mean_stderr;
use crate::harness::{run_replicas, GameSetup, GameTrace, PlayMode, PoolSpec, PredictorSpec, RegretEstimate};
use crate::perturbation::Regime;
use crate::schedules::Schedule;

pub const SCHEMA: &str = "fpl-experiment/1";

fn default_replicas() -> usize {
    1
}

/// The `[run]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: PlayMode,
    /// Bounds to evaluate; every one must have its hypotheses met.
    #[serde(default)]
    pub bounds: Vec<BoundKind>,
    /// Report and require every expert's bound, not only the tightest.
    #[serde(default)]
    pub per_expert: bool,
}

fn default_markov_c() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighProbabilitySpec {
    pub c: f64,
    #[serde(default = "default_markov_c")]
    pub markov_c: f64,
    pub replicas: usize,
}

/// The optional `[checks]` section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_probability: Option<HighProbabilitySpec>,
    /// Horizons at which `l_{1:t}/s_{1:t}^min` is recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_grid: Option<Vec<usize>>,
    /// Require mean regret of at least this fraction of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_regret_per_round: Option<f64>,
    /// Also record the regret of the same game with initial-once
    /// perturbations, without a verdict.
    #[serde(default)]
    pub observe_initial_once: bool,
}

fn default_trace() -> Option<PathBuf> {
    Some(PathBuf::from("trace.csv"))
}

fn default_report() -> PathBuf {
    PathBuf::from("report.json")
}

/// The optional `[output]` section. Relative paths resolve against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Trace of replica 0; omit by setting it to an empty string.
    #[serde(default = "default_trace")]
    pub trace: Option<PathBuf>,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            report: default_report(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub pool: PoolSpec,
    #[serde(default)]
    pub predictor: PredictorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    pub environment: EnvironmentSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| FplError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative fixed-sequence path is taken relative to the file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FplError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| FplError::Config(format!("{}: {e}", path.display())))?;
        if let EnvironmentSpec::Fixed { path: Some(p), .. } = &mut cfg.environment {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn setup(&self) -> GameSetup {
        GameSetup {
            pool: self.pool.clone(),
            predictor: self.predictor.clone(),
            schedule: self.schedule.clone(),
            environment: self.environment.clone(),
            horizon: self.run.horizon,
            mode: self.run.mode,
            seed: self.run.seed,
        }
    }

    /// Everything checkable before playing, including every bound's hypotheses.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(FplError::Config(format!(
                "unsupported schema `{}`, expected `{SCHEMA}`",
                self.schema
            )));
        }
        if self.run.replicas == 0 {
            return Err(FplError::Config("run.replicas must be at least 1".into()));
        }
        let setup = self.setup();
        setup.validate()?;
        for &b in &self.run.bounds {
            check_hypotheses(b, &setup)?;
        }
        if let Some(hp) = &self.checks.high_probability {
            if hp.replicas < 2 {
                return Err(FplError::Config("checks.high_probability.replicas must be at least 2".into()));
            }
        }
        if let Some(grid) = &self.checks.ratio_grid {
            if grid.len() < 2 {
                return Err(FplError::Config("checks.ratio_grid needs at least two horizons".into()));
            }
            if setup.pool.build()?.uniform_complexity().is_none() {
                return Err(FplError::Hypothesis {
                    bound: "ratio-convergence".into(),
                    reason: "needs equal complexities for all experts".into(),
                });
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.run.replicas = replicas;
        self
    }

    /// The config as echoed into reports, with static schedules resolved.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.schedule = self.setup().resolved_schedule();
        c
    }
}

/// Report plus the trace of replica 0, when one was played.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub trace: Option<GameTrace>,
}

impl RunOutput {
    /// Writes the report and, if present, the trace. Returns the paths written.
    pub fn write(&self, output: &OutputSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if let (Some(trace), Some(rel)) = (&self.trace, &output.trace) {
            if !rel.as_os_str().is_empty() {
                let p = out_dir.join(rel);
                write_trace_file(trace, &p)?;
                written.push(p);
            }
        }
        let p = out_dir.join(&output.report);
        self.report.write(&p)?;
        written.push(p);
        Ok(written)
    }
}

/// Plays the configured replicas and evaluates every requested check.
pub fn run_experiment(cfg: &ExperimentConfig, scenario: Option<&str>) -> Result<RunOutput> {
    cfg.validate()?;
    let setup = cfg.setup();
    let resolved = serde_json::to_value(cfg.resolved())?;
    let mut report = ExperimentReport::new(scenario.map(str::to_string), resolved);

    let set = run_replicas(&setup, cfg.run.replicas)?;
    let regret = RegretEstimate::from_summaries(&set.summaries);
    report.observe("regret", regret)?;
    let expected: Vec<f64> = set.summaries.iter().filter_map(|s| s.regret_expected()).collect();
    if expected.len() == set.summaries.len() {
        report.observe("expected_regret", mean_stderr(&expected))?;
    }
    let first = &set.first_trace.summary;
    report.observe("replica0_best_expert", first.best_index)?;
    report.observe("replica0_best_loss", first.best_loss)?;
    report.observe("replica0_final_eta", first.final_eta)?;
    if let PoolSpec::Countable { cap, .. } = cfg.pool {
        report.observe("countable_cap", cap)?;
    }

    for &b in &cfg.run.bounds {
        report.push(evaluate_bound(b, &setup, &set.summaries, cfg.run.per_expert)?);
    }
    if let Some(fraction) = cfg.checks.min_regret_per_round {
        let rhs = fraction * cfg.run.horizon as f64;
        report.push(BoundReport::statistical(
            "linear-regret",
            format!("u_{{1:T}} - s_{{1:T}}^min >= {fraction} T"),
            Direction::Lower,
            regret.mean,
            regret.stderr,
            rhs,
            MC_SIGMAS,
            regret.replicas,
        ));
    }
    if cfg.checks.observe_initial_once {
        let once = setup.with_regime(Regime::InitialOnce);
        let set = run_replicas(&once, cfg.run.replicas)?;
        report.observe("initial_once_regret", RegretEstimate::from_summaries(&set.summaries))?;
    }
    if let Some(hp) = &cfg.checks.high_probability {
        let cov = high_probability_check(&setup, hp.c, hp.markov_c, hp.replicas)?;
        report.observe("expected_loss_shared_sequence", cov.expected_loss)?;
        report.observe("deviation_frequency", cov.deviation_frequency)?;
        report.observe("markov_frequency", cov.markov_frequency)?;
        for c in cov.checks {
            report.push(c);
        }
    }
    if let Some(grid) = &cfg.checks.ratio_grid {
        let r = ratio_convergence_check(&setup, grid)?;
        report.observe("ratio_series", &r.points)?;
        report.push(r.check);
    }
    Ok(RunOutput {
        report,
        trace: Some(set.first_trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
schema = "fpl-experiment/1"

[pool]
kind = "uniform"
n = 2

[schedule]
kind = "dynamic-kt"
k = 0.6931471805599453

[environment]
kind = "fl-killer"

[run]
horizon = 200
replicas = 4
seed = 3
bounds = ["dynamic-kt"]
"#;

    #[test]
    fn parses_and_runs() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.output, OutputSpec::default());
        let out = run_experiment(&cfg, None).unwrap();
        assert!(out.report.passed);
        assert_eq!(out.report.checks.len(), 1);
        assert_eq!(out.trace.unwrap().rounds.len(), 200);
        assert_eq!(out.report.config["schedule"]["kind"], "dynamic-kt");
    }

    #[test]
    fn wrong_schema_fails_loudly() {
        let text = BASIC.replace("fpl-experiment/1", "fpl-experiment/0");
        let e = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("schema"), "{e}");
    }

    #[test]
    fn unknown_fields_report_their_position() {
        let text = BASIC.replace("seed = 3", "seed = 3\nsede = 4");
        let e = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("sede") && e.contains("line"), "{e}");
    }

    #[test]
    fn bound_with_wrong_schedule_is_a_configuration_error() {
        let text = BASIC.replace("bounds = [\"dynamic-kt\"]", "bounds = [\"self-confident-k\"]");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(FplError::Hypothesis { .. })
        ));
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap().with_seed(9).with_replicas(2);
        assert_eq!((cfg.run.seed, cfg.run.replicas), (9, 2));
        assert!(ExperimentConfig::from_toml(BASIC).unwrap().with_replicas(0).validate().is_err());
    }
}
