//! Game loop, replication, bound evaluation and coverage checks.

pub mod bounds;
pub mod coverage;
pub mod output;
pub mod replicate;
pub mod setup;
pub mod stats;
pub mod suites;

use serde::{Deserialize, Serialize};

use crate::environments::Environment;
use crate::error::{FplError, Result};
use crate::experts::best_expert_in_hindsight;
use crate::predictors::{Learner, RoundRecord};

pub use bounds::{check_hypotheses, evaluate_bound, BoundKind, BoundReport, Verdict};
pub use replicate::{monte_carlo_regret, run_replicas, RegretEstimate};
pub use setup::{GameSetup, PoolSpec, PredictorSpec};

/// How the learner's loss is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlayMode {
    /// Sample decisions and record realized losses; expected losses only when
    /// the predictor computes them anyway.
    #[default]
    Actual,
    /// Additionally compute the exact expected loss every round.
    ExactExpected,
}

/// Whether [`run_game`] keeps every round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceDetail {
    #[default]
    Full,
    Summary,
}

/// End-of-game totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSummary {
    pub horizon: usize,
    /// `u_{1:T}`.
    pub cum_actual: f64,
    /// `l_{1:T}`.
    pub cum_expected: Option<f64>,
    /// `r_{1:T}`.
    pub cum_ifpl: Option<f64>,
    /// `sum_t e^{eta_t} r_t`.
    pub ifpl_scaled_sum: Option<f64>,
    /// `min_t (e^{eta_t} r_t - l_t)`.
    pub ifpl_exp_min_slack: Option<f64>,
    /// `min_t ((1 + eta_t + eta_t^2) r_t - l_t)` over rounds with `eta_t <= 1`.
    pub ifpl_poly_min_slack: Option<f64>,
    pub final_eta: Option<f64>,
    /// `s_{1:T}` per expert.
    pub expert_losses: Vec<f64>,
    pub best_index: usize,
    pub best_loss: f64,
}

impl GameSummary {
    pub fn regret_actual(&self) -> f64 {
        self.cum_actual - self.best_loss
    }

    pub fn regret_expected(&self) -> Option<f64> {
        self.cum_expected.map(|l| l - self.best_loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameTrace {
    /// Every round in order; empty when run with [`TraceDetail::Summary`].
    pub rounds: Vec<RoundRecord>,
    pub summary: GameSummary,
}

impl GameTrace {
    /// Running `u_{1:t}`, aligned with `rounds`.
    pub fn cumulative_actual(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.actual_loss;
                Some(*acc)
            })
            .collect()
    }
}

/// Plays `horizon` rounds and keeps every round.
pub fn run_game(
    learner: &mut dyn Learner,
    env: &mut dyn Environment,
    horizon: usize,
    mode: PlayMode,
) -> Result<GameTrace> {
    run_game_with(learner, env, horizon, mode, TraceDetail::Full)
}

pub fn run_game_with(
    learner: &mut dyn Learner,
    env: &mut dyn Environment,
    horizon: usize,
    mode: PlayMode,
    detail: TraceDetail,
) -> Result<GameTrace> {
    if horizon == 0 {
        return Err(FplError::param("horizon", "must be at least 1"));
    }
    if learner.n_experts() != env.n() {
        return Err(FplError::DimensionMismatch {
            expected: learner.n_experts(),
            got: env.n(),
        });
    }
    let exact = mode == PlayMode::ExactExpected;
    if exact && !learner.tracks_expected_loss() {
        return Err(FplError::Unsupported(format!(
            "exact expected losses for predictor `{}`",
            learner.kind()
        )));
    }

    let mut history = Vec::with_capacity(horizon);
    let mut rounds = Vec::with_capacity(if detail == TraceDetail::Full { horizon } else { 0 });
    let mut cum_expected = learner.tracks_expected_loss().then_some(0.0);
    let mut ifpl: Option<(f64, f64, f64, f64)> = None;
    let mut final_eta = None;
    for t in 1..=horizon {
        learner.decide()?;
        let losses = env.next_losses(t, &history)?;
        let rec = learner.observe(&losses)?;
        history.push(rec.chosen);
        final_eta = rec.eta;
        if let (Some(acc), Some(l)) = (cum_expected.as_mut(), rec.expected_loss) {
            *acc += l;
        }
        if let (Some(r), Some(l), Some(eta)) = (rec.ifpl_loss, rec.expected_loss, rec.eta) {
            let (sum, scaled, exp_slack, poly_slack) = ifpl.get_or_insert((0.0, 0.0, f64::INFINITY, f64::INFINITY));
            *sum += r;
            *scaled += eta.exp() * r;
            *exp_slack = exp_slack.min(eta.exp() * r - l);
            if eta <= 1.0 {
                *poly_slack = poly_slack.min((1.0 + eta + eta * eta) * r - l);
            }
        }
        if detail == TraceDetail::Full {
            rounds.push(rec);
        }
    }

    let state = learner.state();
    let (best_index, best_loss) = best_expert_in_hindsight(state)?;
    let summary = GameSummary {
        horizon,
        cum_actual: state.learner_cum_actual(),
        cum_expected,
        cum_ifpl: ifpl.map(|x| x.0),
        ifpl_scaled_sum: ifpl.map(|x| x.1),
        ifpl_exp_min_slack: ifpl.map(|x| x.2),
        ifpl_poly_min_slack: ifpl.and_then(|x| x.3.is_finite().then_some(x.3)),
        final_eta,
        expert_losses: state.cum_loss().to_vec(),
        best_index,
        best_loss,
    };
    Ok(GameTrace { rounds, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{Bernoulli, FixedSequence, FlKiller};
    use crate::experts::ExpertPool;
    use crate::perturbation::Regime;
    use crate::predictors::{FollowTheLeader, FplOptions, FplPredictor};
    use crate::schedules::Schedule;

    fn fpl(n: usize, options: FplOptions) -> FplPredictor {
        FplPredictor::seeded(ExpertPool::uniform(n).unwrap(), Schedule::DynamicT, Regime::FreshPerStep, 7, 0, options)
            .unwrap()
    }

    #[test]
    fn single_expert_has_zero_regret() {
        let mut l = fpl(1, FplOptions::default());
        let mut env = Bernoulli::new(vec![0.4], 3, 0).unwrap();
        let tr = run_game(&mut l, &mut env, 10, PlayMode::Actual).unwrap();
        assert_eq!(tr.summary.cum_actual, tr.summary.expert_losses[0]);
        assert_eq!(tr.summary.regret_actual(), 0.0);
    }

    #[test]
    fn zero_losses_give_zero_loss() {
        let mut l = fpl(3, FplOptions::default());
        let mut env = FixedSequence::from_rows(vec![vec![0.0; 3]; 100]).unwrap();
        let tr = run_game(&mut l, &mut env, 100, PlayMode::ExactExpected);
        assert!(tr.is_err(), "plain FPL without tracking cannot run in exact mode");
        let mut l = fpl(
            3,
            FplOptions {
                track_expected: true,
                ..Default::default()
            },
        );
        let tr = run_game(&mut l, &mut env, 100, PlayMode::ExactExpected).unwrap();
        assert_eq!(tr.summary.cum_actual, 0.0);
        assert_eq!(tr.summary.cum_expected, Some(0.0));
    }

    #[test]
    fn follow_the_leader_loses_linearly() {
        let mut l = FollowTheLeader::new(ExpertPool::uniform(2).unwrap());
        let mut env = FlKiller::new(2).unwrap();
        let tr = run_game(&mut l, &mut env, 1000, PlayMode::Actual).unwrap();
        // Independent oracle: FL with lowest-index ties, replayed directly.
        let (mut a, mut b, mut fl) = (0.0f64, 0.0f64, 0.0);
        for t in 1..=1000 {
            let [x, y] = FlKiller::losses_at(t);
            fl += if a <= b { x } else { y };
            a += x;
            b += y;
        }
        assert_eq!(tr.summary.cum_actual, fl);
        assert!(fl >= 998.0);
        assert!(tr.summary.regret_actual() >= 400.0);
        let sum: f64 = tr.rounds.iter().map(|r| r.actual_loss).sum();
        assert_eq!(sum, tr.summary.cum_actual);
    }

    #[test]
    fn ifpl_diagnostics_are_collected() {
        let mut l = fpl(
            3,
            FplOptions {
                ifpl_diagnostic: true,
                ..Default::default()
            },
        );
        let mut env = Bernoulli::new(vec![0.2, 0.5, 0.8], 1, 0).unwrap();
        let tr = run_game(&mut l, &mut env, 50, PlayMode::ExactExpected).unwrap();
        let s = &tr.summary;
        assert!(s.ifpl_exp_min_slack.unwrap() >= -1e-9);
        assert!(s.ifpl_poly_min_slack.unwrap() >= -1e-9);
        assert!(s.cum_ifpl.unwrap() > 0.0);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let mut l = fpl(3, FplOptions::default());
        let mut env = FlKiller::new(2).unwrap();
        assert!(run_game(&mut l, &mut env, 5, PlayMode::Actual).is_err());
    }
}
