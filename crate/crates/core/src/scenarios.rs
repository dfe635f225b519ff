//! Built-in, self-contained verification scenarios with pinned seeds.

use serde::Serialize;

use crate::config::{ChecksSpec, ExperimentConfig, HighProbabilitySpec, OutputSpec, RunOutput, RunSpec, SCHEMA};
use crate::environments::{BernoulliP, EnvironmentSpec};
use crate::error::{FplError, Result};
use crate::exact::{
    choice_probabilities_monte_carlo, choice_probabilities_quadrature, choice_probabilities_subset_sum,
    PenalizedScore,
};
use crate::harness::bounds::{BoundKind, BoundReport, Direction};
use crate::harness::output::ExperimentReport;
use crate::harness::stats::mean_stderr;
use crate::harness::{suites, PlayMode, PoolSpec, PredictorSpec};
use crate::perturbation::{lanes, sample_exponential, shifted_max_expectation_bound, substream, EULER_GAMMA};
use crate::predictors::{HierarchyMode, MetaLoss, PredictorKind};
use crate::schedules::{LossSource, Schedule};

/// One catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    /// The inequality or identity the scenario verifies.
    pub claim: &'static str,
    pub description: &'static str,
    /// Default master seed.
    pub seed: u64,
}

pub const CATALOG: [Scenario; 13] = [
    Scenario {
        name: "exact-probability-selftest",
        claim: "P[I = 0] = 1 - e^-1/2 for scores (0, 1), eta = 1",
        description: "subset-sum, quadrature and 10^6-draw Monte Carlo choice probabilities agree",
        seed: 101,
    },
    Scenario {
        name: "shifted-max-expectation",
        claim: "0.57721 + ln n <= E[max_i q_i] <= 1 + ln n",
        description: "Monte Carlo mean of the largest of 10 Exp(1) draws, 10^6 samples",
        seed: 102,
    },
    Scenario {
        name: "fl-killer-dynamic-rate",
        claim: "eta_t = sqrt(K/2t), k_i <= K: l <= s_i + 2 sqrt(2TK)",
        description: "FPL with K = ln 2 on the alternating sequence, T = 10^4, 200 replicas",
        seed: 103,
    },
    Scenario {
        name: "fl-failure",
        claim: "Follow the Leader on the alternating sequence: regret >= 0.4 T",
        description: "Follow the Leader, T = 1000",
        seed: 104,
    },
    Scenario {
        name: "fpl-vs-ifpl-exact",
        claim: "l_t <= e^eta r_t, and l_t <= (1 + eta + eta^2) r_t for eta <= 1",
        description: "100 random one-round instances, n <= 6, eta in {0.1, 0.5, 1}, exact",
        seed: 105,
    },
    Scenario {
        name: "ifpl-vs-beh-exact",
        claim: "r_{1:T} <= s_{1:T}^i + k^i/eta_T for all i",
        description: "random games with n <= 6, T <= 8 and decreasing rates, exact",
        seed: 106,
    },
    Scenario {
        name: "lower-bound-exact",
        claim: "uniform k: l_{1:T} >= s_min - ln(n)/eta_T",
        description: "random games with n <= 6, T <= 8 and decreasing rates, exact",
        seed: 107,
    },
    Scenario {
        name: "self-confident-bernoulli",
        claim: "eta_t = sqrt(K/2(l_<t + 1)), k_i <= K: l <= s_i + 2 sqrt(2(s_i + 1)K) + 8K",
        description: "n = 10, K = ln 10, Bernoulli(0.5), T = 10^4, exact expected loss, 50 replicas",
        seed: 108,
    },
    Scenario {
        name: "hierarchy-countable",
        claim: "l <= s_i + sqrt(T)[2 sqrt(2(k_i + 1)) + 1/2 + 2 ln(k_i + 1) + 2] for all i",
        description: "hierarchical FPL over 100 experts with k_i = 1/2 + 2 ln i, Bernoulli losses, T = 10^4, 100 replicas",
        seed: 109,
    },
    Scenario {
        name: "high-probability-coverage",
        claim: "P[|u - l| >= sqrt(3cl)] <= 2e^-c for l >= 3c; P[u >= cl] <= 1/c",
        description: "n = 10, one shared Bernoulli(0.5) sequence, T = 10^4, 10^4 perturbation replicas",
        seed: 110,
    },
    Scenario {
        name: "adaptive-adversary",
        claim: "fresh perturbations each round: l <= s_i + 2 sqrt(2TK) against adaptive losses",
        description: "last-choice punisher, n = 2, T = 5000, 200 replicas; initial-once regret recorded",
        seed: 111,
    },
    Scenario {
        name: "structural-identities",
        claim: "decomposition identity; infeasible leader has zero regret; feasible leader has nonnegative regret",
        description: "1000 random instances per identity with n <= 8, T <= 8, losses in [-5, 5]",
        seed: 112,
    },
    Scenario {
        name: "ratio-convergence",
        claim: "eta_t -> 0 and eta_t s_min -> inf: l_{1:t}/s_{1:t}^min -> 1",
        description: "n = 5, eta_t = sqrt(1/2) min(1, sqrt(K/s_min)), Bernoulli(0.5), t in {10^3, 10^4, 10^5}",
        seed: 113,
    },
];

pub fn catalog() -> &'static [Scenario] {
    &CATALOG
}

pub fn find(name: &str) -> Option<&'static Scenario> {
    CATALOG.iter().find(|s| s.name == name)
}

/// Optional command-line overrides. For suite scenarios `replicas` sets the
/// number of random instances, and for sampling scenarios the sample count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
}

fn base(pool: PoolSpec, schedule: Option<Schedule>, environment: EnvironmentSpec, run: RunSpec) -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA.into(),
        pool,
        predictor: PredictorSpec::default(),
        schedule,
        environment,
        run,
        checks: ChecksSpec::default(),
        output: OutputSpec::default(),
    }
}

fn run(horizon: usize, replicas: usize, seed: u64, mode: PlayMode, bounds: Vec<BoundKind>) -> RunSpec {
    RunSpec {
        horizon,
        replicas,
        seed,
        mode,
        bounds,
        per_expert: false,
    }
}

fn bernoulli(p: f64, shared: bool) -> EnvironmentSpec {
    EnvironmentSpec::Bernoulli {
        p: BernoulliP::Common(p),
        shared_sequence: shared,
    }
}

/// The config behind a scenario that is an ordinary experiment, or `None`
/// for scenarios computed by dedicated routines.
pub fn scenario_config(name: &str) -> Option<ExperimentConfig> {
    let seed = find(name)?.seed;
    let ln = |n: f64| n.ln();
    let cfg = match name {
        "fl-killer-dynamic-rate" => base(
            PoolSpec::Uniform { n: 2 },
            Some(Schedule::DynamicKt { k: ln(2.0) }),
            EnvironmentSpec::FlKiller,
            run(10_000, 200, seed, PlayMode::Actual, vec![BoundKind::DynamicKt]),
        ),
        "fl-failure" => {
            let mut c = base(
                PoolSpec::Uniform { n: 2 },
                None,
                EnvironmentSpec::FlKiller,
                run(1000, 1, seed, PlayMode::Actual, vec![]),
            );
            c.predictor.kind = PredictorKind::Fl;
            c.checks.min_regret_per_round = Some(0.4);
            c
        }
        "self-confident-bernoulli" => base(
            PoolSpec::Uniform { n: 10 },
            Some(Schedule::SelfConfidentK {
                k: ln(10.0),
                source: LossSource::Exact,
            }),
            bernoulli(0.5, false),
            run(10_000, 50, seed, PlayMode::ExactExpected, vec![BoundKind::SelfConfidentK]),
        ),
        "hierarchy-countable" => {
            let mut p = vec![0.5; 100];
            p[19] = 0.3;
            let mut c = base(
                PoolSpec::Countable {
                    cap: 100,
                    finitized: false,
                },
                None,
                EnvironmentSpec::Bernoulli {
                    p: BernoulliP::PerExpert(p),
                    shared_sequence: false,
                },
                run(10_000, 100, seed, PlayMode::Actual, vec![BoundKind::HierarchyChain]),
            );
            c.predictor = PredictorSpec {
                kind: PredictorKind::HierarchicalFpl,
                hierarchy: HierarchyMode::Dynamic,
                meta_loss: MetaLoss::Realized,
                ..PredictorSpec::default()
            };
            c.run.per_expert = true;
            c
        }
        "high-probability-coverage" => {
            let mut c = base(
                PoolSpec::Uniform { n: 10 },
                Some(Schedule::DynamicKt { k: ln(10.0) }),
                bernoulli(0.5, true),
                run(10_000, 20, seed, PlayMode::Actual, vec![BoundKind::DynamicKt]),
            );
            c.checks.high_probability = Some(HighProbabilitySpec {
                c: 3.0,
                markov_c: 2.0,
                replicas: 10_000,
            });
            c
        }
        "adaptive-adversary" => {
            let mut c = base(
                PoolSpec::Uniform { n: 2 },
                Some(Schedule::DynamicKt { k: ln(2.0) }),
                EnvironmentSpec::LastChoicePunisher,
                run(5000, 200, seed, PlayMode::Actual, vec![BoundKind::DynamicKt]),
            );
            c.checks.observe_initial_once = true;
            c
        }
        "ratio-convergence" => {
            let mut c = base(
                PoolSpec::Uniform { n: 5 },
                Some(Schedule::AdaptiveSminK { k: ln(5.0) }),
                bernoulli(0.5, false),
                run(1000, 1, seed, PlayMode::ExactExpected, vec![BoundKind::AdaptiveSminK]),
            );
            c.checks.ratio_grid = Some(vec![1000, 10_000, 100_000]);
            c
        }
        _ => return None,
    };
    Some(cfg)
}

/// Runs a built-in scenario.
pub fn run_scenario(name: &str, overrides: Overrides) -> Result<RunOutput> {
    let scenario = find(name).ok_or_else(|| {
        FplError::Config(format!("unknown scenario `{name}`; `fpl scenarios` lists the catalog"))
    })?;
    let seed = overrides.seed.unwrap_or(scenario.seed);
    if let Some(mut cfg) = scenario_config(name) {
        cfg.run.seed = seed;
        if let Some(r) = overrides.replicas {
            cfg.run.replicas = r;
        }
        return crate::config::run_experiment(&cfg, Some(name));
    }

    let echo = serde_json::json!({
        "scenario": name,
        "seed": seed,
        "size": overrides.replicas,
    });
    let mut report = ExperimentReport::new(Some(name.to_string()), echo);
    let size = |default: usize| overrides.replicas.unwrap_or(default);
    match name {
        "exact-probability-selftest" => exact_probability_selftest(&mut report, seed, size(1_000_000))?,
        "shifted-max-expectation" => shifted_max_expectation(&mut report, seed, 10, size(1_000_000))?,
        "fpl-vs-ifpl-exact" => report.push(suites::fpl_vs_ifpl_suite(size(100), seed)?),
        "ifpl-vs-beh-exact" => report.push(suites::ifpl_vs_beh_suite(size(200), seed)?),
        "lower-bound-exact" => report.push(suites::lower_bound_suite(size(200), seed)?),
        "structural-identities" => {
            for r in suites::structural_identities(size(1000), seed)? {
                report.push(r);
            }
        }
        other => unreachable!("catalog entry `{other}` has no runner"),
    }
    Ok(RunOutput { report, trace: None })
}

fn exact_probability_selftest(report: &mut ExperimentReport, seed: u64, samples: usize) -> Result<()> {
    let score = PenalizedScore::new(vec![0.0, 1.0])?;
    let exact = 1.0 - (-1.0f64).exp() / 2.0;
    let subset = choice_probabilities_subset_sum(&score, 1.0)?;
    let quad = choice_probabilities_quadrature(&score, 1.0)?;
    let mut rng = substream(seed, 0, lanes::ESTIMATE);
    let mc = choice_probabilities_monte_carlo(&score, 1.0, samples, &mut rng)?;
    let sigma = (exact * (1.0 - exact) / samples as f64).sqrt();

    let equal = |id: &str, claim: &str, got: f64, want: f64, tol: f64| {
        let mut r = BoundReport::deterministic(id, claim, Direction::Upper, (got - want).abs(), tol, 0.0);
        r.note = Some(format!("value {got}, reference {want}"));
        r
    };
    report.push(equal(
        "subset-sum-closed-form",
        "subset sum gives P[I = 0] = 1 - e^-1/2",
        subset[0],
        exact,
        1e-12,
    ));
    report.push(equal("quadrature-vs-subset-sum", "|quadrature - subset sum| <= 1e-9", quad[0], subset[0], 1e-9));
    let mut r = BoundReport::statistical(
        "monte-carlo-vs-subset-sum",
        "|Monte Carlo - subset sum| <= 4 sigma",
        Direction::Upper,
        (mc[0] - subset[0]).abs(),
        sigma,
        0.0,
        4.0,
        samples,
    );
    r.note = Some(format!("Monte Carlo {} from {samples} draws", mc[0]));
    report.push(r);
    report.observe("probabilities_subset_sum", &subset)?;
    report.observe("probabilities_quadrature", &quad)?;
    report.observe("probabilities_monte_carlo", &mc)?;
    Ok(())
}

fn shifted_max_expectation(report: &mut ExperimentReport, seed: u64, n: usize, samples: usize) -> Result<()> {
    let mut rng = substream(seed, 0, lanes::PERTURBATION);
    let draws: Vec<f64> = (0..samples)
        .map(|_| (0..n).map(|_| sample_exponential(&mut rng)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let m = mean_stderr(&draws);
    let lower = EULER_GAMMA + (n as f64).ln();
    let upper = shifted_max_expectation_bound(&vec![0.0; n]);
    report.push(BoundReport::statistical(
        "shifted-max-lower",
        "E[max_i q_i] >= 0.57721 + ln n",
        Direction::Lower,
        m.mean,
        m.stderr,
        lower,
        3.0,
        samples,
    ));
    report.push(BoundReport::statistical(
        "shifted-max-upper",
        "E[max_i q_i] <= 1 + ln n",
        Direction::Upper,
        m.mean,
        m.stderr,
        upper,
        3.0,
        samples,
    ));
    // E[max_i q_i] equals the harmonic number H_n.
    let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
    report.observe("harmonic_number", harmonic)?;
    report.observe("sample_mean", m)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn catalog_is_well_formed() {
        assert!(CATALOG.len() >= 11);
        let names: HashSet<_> = CATALOG.iter().map(|s| s.name).collect();
        assert_eq!(names.len(), CATALOG.len());
        assert!(CATALOG.iter().all(|s| !s.claim.is_empty()));
        let seeds: HashSet<_> = CATALOG.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), CATALOG.len());
    }

    #[test]
    fn config_scenarios_validate() {
        for s in catalog() {
            if let Some(cfg) = scenario_config(s.name) {
                cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            }
        }
    }

    #[test]
    fn small_runs_of_every_scenario() {
        // Reduced sizes; the full runs live in the acceptance suite.
        for name in ["exact-probability-selftest", "fpl-vs-ifpl-exact", "structural-identities", "fl-failure"] {
            let out = run_scenario(
                name,
                Overrides {
                    seed: None,
                    replicas: Some(20),
                },
            )
            .unwrap();
            assert!(out.report.passed, "{name}: {:?}", out.report.failures());
        }
    }

    #[test]
    fn unknown_scenario() {
        assert!(run_scenario("nope", Overrides::default()).is_err());
    }
}
