//! Concentration of the realized loss around its expectation, and the
//! convergence of `l_{1:t} / s_{1:t}^min`.

use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{BoundReport, Direction, MC_SIGMAS};
use super::setup::GameSetup;
use super::{PlayMode, TraceDetail};
use crate::error::{FplError, Result};
use crate::perturbation::Regime;
use crate::predictors::PredictorKind;
use crate::schedules::LossSource;

/// Deviation frequencies of `u_{1:T}` around the common `l_{1:T}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// `l_{1:T}`, identical for all replicas.
    pub expected_loss: f64,
    pub c: f64,
    pub markov_c: f64,
    pub replicas: usize,
    /// Fraction of replicas with `|u - l| >= sqrt(3 c l)`.
    pub deviation_frequency: f64,
    /// Fraction of replicas with `u >= markov_c * l`.
    pub markov_frequency: f64,
    pub checks: Vec<BoundReport>,
}

fn precondition(reason: impl Into<String>) -> FplError {
    FplError::Hypothesis {
        bound: "high-probability".into(),
        reason: reason.into(),
    }
}

/// Checks `P[|u - l| >= sqrt(3cl)] <= 2e^{-c}` (needs `l >= 3c`) and
/// `P[u >= c' l] <= 1/c'` over `replicas` independent perturbation draws on
/// one fixed loss sequence. Frequencies pass within a binomial `3 sigma` band.
pub fn high_probability_check(setup: &GameSetup, c: f64, markov_c: f64, replicas: usize) -> Result<CoverageReport> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(FplError::param("c", format!("{c} must be positive")));
    }
    if !(markov_c > 1.0 && markov_c.is_finite()) {
        return Err(FplError::param("markov_c", format!("{markov_c} must exceed 1")));
    }
    if replicas < 2 {
        return Err(FplError::param("replicas", "need at least 2"));
    }
    if !setup.environment.is_replica_invariant() {
        return Err(precondition(
            "the loss sequence must be the same in every replica (fixed, fl-killer or shared Bernoulli)",
        ));
    }
    if setup.predictor.regime != Regime::FreshPerStep {
        return Err(precondition("needs fresh-per-step perturbations"));
    }
    if !matches!(setup.predictor.kind, PredictorKind::Fpl | PredictorKind::Ifpl) {
        return Err(precondition("needs predictor `fpl`"));
    }
    let schedule = setup.resolved_schedule().ok_or_else(|| precondition("no schedule configured"))?;
    if schedule.loss_source().is_some_and(|s| s != LossSource::Exact) {
        return Err(precondition(
            "rates fed by sampled losses differ between replicas, so l_{1:T} is not common to all of them",
        ));
    }

    let exact = setup.with_mode(PlayMode::ExactExpected).run_replica(0, TraceDetail::Summary)?;
    let ell = exact.summary.cum_expected.expect("exact mode records expected loss");
    if ell < 3.0 * c {
        return Err(precondition(format!("needs l_{{1:T}} >= 3c = {}, got {ell}", 3.0 * c)));
    }

    let actual = setup.with_mode(PlayMode::Actual);
    let realized: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| actual.run_replica(r, TraceDetail::Summary).map(|t| t.summary.cum_actual))
        .collect::<Result<_>>()?;

    let radius = (3.0 * c * ell).sqrt();
    let frequency = |hit: &dyn Fn(f64) -> bool| realized.iter().filter(|&&u| hit(u)).count() as f64 / replicas as f64;
    let deviation_frequency = frequency(&|u| (u - ell).abs() >= radius);
    let markov_frequency = frequency(&|u| u >= markov_c * ell);

    let band = |p: f64| (p * (1.0 - p) / replicas as f64).sqrt();
    let p_ch = 2.0 * (-c).exp();
    let p_markov = 1.0 / markov_c;
    let checks = vec![
        BoundReport::statistical(
            "chernoff-hoeffding-coverage",
            "l >= 3c: P[|u_{1:T} - l_{1:T}| >= sqrt(3c l_{1:T})] <= 2e^{-c}",
            Direction::Upper,
            deviation_frequency,
            band(p_ch),
            p_ch,
            MC_SIGMAS,
            replicas,
        )
        .with_note(format!("l_{{1:T}} = {ell}, c = {c}; lhs_stderr is the binomial standard error at the bound")),
        BoundReport::statistical(
            "markov-coverage",
            "P[u_{1:T} >= c l_{1:T}] <= 1/c",
            Direction::Upper,
            markov_frequency,
            band(p_markov),
            p_markov,
            MC_SIGMAS,
            replicas,
        )
        .with_note(format!("l_{{1:T}} = {ell}, c = {markov_c}")),
    ];
    Ok(CoverageReport {
        expected_loss: ell,
        c,
        markov_c,
        replicas,
        deviation_frequency,
        markov_frequency,
        checks,
    })
}

/// `l_{1:t} / s_{1:t}^min` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub t: usize,
    pub expected_loss: f64,
    pub best_loss: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub points: Vec<RatioPoint>,
    /// Set when `s^min = 0` at some grid point, where the ratio is undefined.
    pub skipped: bool,
    pub check: BoundReport,
}

/// Plays one exact-mode game to the largest grid point and records the ratio
/// at each point. Passes when `|ratio - 1|` is smaller at the last point than
/// at the first.
pub fn ratio_convergence_check(setup: &GameSetup, grid: &[usize]) -> Result<RatioReport> {
    let claim = "eta_t -> 0 and eta_t s_min -> inf: l_{1:t}/s_{1:t}^min -> 1";
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 2 || grid[0] == 0 {
        return Err(FplError::param("ratio_grid", "needs at least two positive horizons"));
    }
    let pool = setup.pool.build()?;
    if pool.uniform_complexity().is_none() {
        return Err(FplError::Hypothesis {
            bound: "ratio-convergence".into(),
            reason: "needs equal complexities for all experts".into(),
        });
    }
    let horizon = *grid.last().expect("non-empty");
    let mut game = setup.with_mode(PlayMode::ExactExpected);
    game.horizon = horizon;
    let trace = game.run_replica(0, TraceDetail::Full)?;

    let mut points = Vec::with_capacity(grid.len());
    let mut ell = 0.0;
    let mut next = grid.iter().peekable();
    for rec in &trace.rounds {
        ell += rec.expected_loss.expect("exact mode records expected loss");
        if next.peek() == Some(&&rec.t) {
            next.next();
            points.push(RatioPoint {
                t: rec.t,
                expected_loss: ell,
                best_loss: rec.cum_best,
                ratio: ell / rec.cum_best,
            });
        }
    }
    let skipped = points.iter().any(|p| p.best_loss == 0.0);
    let first = (points[0].ratio - 1.0).abs();
    let last = (points[points.len() - 1].ratio - 1.0).abs();
    let mut check = BoundReport::deterministic("ratio-convergence", claim, Direction::Upper, last, first, 0.0);
    if skipped {
        check.verdict = super::Verdict::Pass;
        check = check.with_note("skipped: s_min = 0 at a grid point, where the ratio is undefined");
    } else {
        check.verdict = super::Verdict::from_bool(last < first);
        check = check.with_note(format!(
            "lhs = |ratio - 1| at t = {}, rhs = |ratio - 1| at t = {}",
            points[points.len() - 1].t,
            points[0].t
        ));
    }
    Ok(RatioReport { points, skipped, check })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{BernoulliP, EnvironmentSpec};
    use crate::harness::{PoolSpec, PredictorSpec};
    use crate::schedules::Schedule;

    fn setup(n: usize, env: EnvironmentSpec) -> GameSetup {
        GameSetup {
            pool: PoolSpec::Uniform { n },
            predictor: PredictorSpec::default(),
            schedule: Some(Schedule::DynamicKt {
                k: (n as f64).ln().max(0.1),
            }),
            environment: env,
            horizon: 300,
            mode: PlayMode::Actual,
            seed: 2,
        }
    }

    fn shared(p: f64) -> EnvironmentSpec {
        EnvironmentSpec::Bernoulli {
            p: BernoulliP::Common(p),
            shared_sequence: true,
        }
    }

    #[test]
    fn coverage_on_a_short_game() {
        let r = high_probability_check(&setup(4, shared(0.5)), 3.0, 2.0, 200).unwrap();
        assert!(r.expected_loss >= 9.0);
        assert!(r.checks.iter().all(BoundReport::passed), "{r:?}");
    }

    #[test]
    fn coverage_preconditions() {
        let per_replica = EnvironmentSpec::Bernoulli {
            p: BernoulliP::Common(0.5),
            shared_sequence: false,
        };
        assert!(high_probability_check(&setup(4, per_replica), 3.0, 2.0, 10).is_err());
        let s = setup(4, shared(0.5)).with_regime(Regime::InitialOnce);
        assert!(high_probability_check(&s, 3.0, 2.0, 10).is_err());
        // Too little expected loss for c = 3.
        assert!(high_probability_check(&setup(4, shared(0.0)), 3.0, 2.0, 10).is_err());
        assert!(high_probability_check(&setup(4, shared(0.5)), 3.0, 1.0, 10).is_err());
    }

    #[test]
    fn single_expert_ratio_is_one() {
        let mut s = setup(1, shared(0.5));
        s.schedule = Some(Schedule::AdaptiveSminK { k: 1.0 });
        let r = ratio_convergence_check(&s, &[10, 100]).unwrap();
        assert!(r.points.iter().all(|p| (p.ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_losses_skip_the_ratio() {
        let mut s = setup(3, shared(0.0));
        s.schedule = Some(Schedule::AdaptiveSminK { k: 3f64.ln() });
        let r = ratio_convergence_check(&s, &[10, 50]).unwrap();
        assert!(r.skipped);
        assert!(r.check.passed());
    }

    #[test]
    fn ratio_needs_uniform_complexities() {
        let mut s = setup(2, shared(0.5));
        s.pool = PoolSpec::Explicit {
            k: vec![1.0, 2.0],
            entering_times: None,
        };
        assert!(ratio_convergence_check(&s, &[10, 50]).is_err());
    }
}
