//! Decision makers: FPL, the infeasible IFPL diagnostic, Follow the Leader,
//! the deterministic simplex-weight predictor and hierarchical FPL.

mod hierarchy;

pub use hierarchy::{class_of, meta_complexity, HierarchicalFpl, HierarchyMode, MetaLoss};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};
use crate::exact::{choice_probabilities, choice_probabilities_monte_carlo, PenalizedScore};
use crate::experts::{argmin_by, Decision, ExpertPool, GameState, LossVector};
use crate::perturbation::{lanes, substream, Perturbation, Regime};
use crate::schedules::{LossSource, Observables, RateTracker, Schedule};

/// What a learner plays in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Play {
    /// The expert played, or the heaviest weight for simplex decisions.
    pub chosen: usize,
    pub eta: Option<f64>,
    pub decision: Decision,
}

/// Per-round outcome reported back by a learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    pub eta: Option<f64>,
    pub chosen: usize,
    /// `u_t`, the realized loss.
    pub actual_loss: f64,
    /// `l_t`, the expected loss, when computed.
    pub expected_loss: Option<f64>,
    /// `r_t`, the expected loss of the infeasible leader, when computed.
    pub ifpl_loss: Option<f64>,
    /// `min_i s_{1:t}^i` after this round.
    pub cum_best: f64,
}

/// A sequential predictor: one `decide` followed by one `observe` per round.
pub trait Learner: Send {
    fn n_experts(&self) -> usize;

    fn decide(&mut self) -> Result<Play>;

    fn observe(&mut self, losses: &LossVector) -> Result<RoundRecord>;

    fn state(&self) -> &GameState;

    /// Whether `observe` reports the exact expected loss every round.
    fn tracks_expected_loss(&self) -> bool;

    /// Configuration name of the predictor kind.
    fn kind(&self) -> &'static str;
}

/// FPL choice for the upcoming round: arg min over active experts of
/// `s_{<t} + (k - q)/eta`, lowest index on ties.
pub fn fpl_decide(state: &GameState, pool: &ExpertPool, eta: f64, q: &[f64]) -> Result<Decision> {
    perturbed_leader(state.cum_loss(), state.t() + 1, pool, eta, q).map(Decision::Expert)
}

/// The infeasible leader, which already knows the current losses `s_t`.
/// Diagnostic only.
pub fn ifpl_decide(
    state: &GameState,
    pool: &ExpertPool,
    eta: f64,
    q: &[f64],
    current: &LossVector,
) -> Result<Decision> {
    let t = state.t() + 1;
    let with_current = state.clone().accumulated(current)?;
    perturbed_leader(with_current.cum_loss(), t, pool, eta, q).map(Decision::Expert)
}

/// Follow the Leader: arg min of `s_{<t} + k` with no perturbation.
pub fn fl_decide(state: &GameState, pool: &ExpertPool) -> Result<Decision> {
    check_dims(pool.n(), state.n())?;
    let t = state.t() + 1;
    let cum = state.cum_loss();
    let k = pool.complexities();
    argmin_by((0..pool.n()).filter(|&i| pool.is_active(i, t)), |i| cum[i] + k[i])
        .map(Decision::Expert)
        .ok_or(FplError::NoActiveExperts(t))
}

/// Simplex weights `w_t^i = P[I_t = i]` of FPL at rate `eta`.
pub fn weight_vector(state: &GameState, pool: &ExpertPool, eta: f64) -> Result<Decision> {
    let t = state.t() + 1;
    let score = penalized(state.cum_loss(), t, pool, eta)?;
    let w = choice_probabilities(&score, eta)?;
    // Both probability routines clamp into [0, 1]; renormalize the last ulp.
    let total: f64 = w.iter().sum();
    Decision::weights(w.into_iter().map(|x| x / total).collect())
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FplError::DimensionMismatch { expected, got })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && !eta.is_nan() {
        Ok(())
    } else {
        Err(FplError::param("eta", format!("{eta} must be positive")))
    }
}

fn perturbed_leader(cum: &[f64], t: usize, pool: &ExpertPool, eta: f64, q: &[f64]) -> Result<usize> {
    check_eta(eta)?;
    check_dims(pool.n(), cum.len())?;
    check_dims(pool.n(), q.len())?;
    if let Some(bad) = q.iter().find(|&&x| !(x >= 0.0)) {
        return Err(FplError::param("perturbation", format!("{bad} is negative")));
    }
    let k = pool.complexities();
    argmin_by((0..pool.n()).filter(|&i| pool.is_active(i, t)), |i| cum[i] + (k[i] - q[i]) / eta)
        .ok_or(FplError::NoActiveExperts(t))
}

fn penalized(cum: &[f64], t: usize, pool: &ExpertPool, eta: f64) -> Result<PenalizedScore> {
    check_eta(eta)?;
    PenalizedScore::from_losses(cum, pool.complexities(), eta, |i| pool.is_active(i, t)).map_err(|e| match e {
        FplError::NoActiveExperts(_) => FplError::NoActiveExperts(t),
        other => other,
    })
}

fn argmax(w: &[f64]) -> usize {
    argmin_by(0..w.len(), |i| -w[i]).unwrap_or(0)
}

/// Optional per-round computations of an [`FplPredictor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FplOptions {
    /// Compute the exact expected loss `l_t` every round.
    pub track_expected: bool,
    /// Compute the infeasible leader's expected loss `r_t` every round.
    pub ifpl_diagnostic: bool,
    /// Draws per round when a self-confident schedule reads a Monte Carlo estimate.
    pub mc_samples: usize,
}

impl FplOptions {
    pub const DEFAULT_MC_SAMPLES: usize = 1000;
}

#[derive(Debug, Clone)]
struct Pending {
    chosen: usize,
    eta: f64,
    exact: Option<Vec<f64>>,
    estimate: Option<Vec<f64>>,
}

/// Follow the Perturbed Leader with a learning-rate schedule.
#[derive(Debug, Clone)]
pub struct FplPredictor {
    pool: ExpertPool,
    tracker: RateTracker,
    perturbation: Perturbation,
    state: GameState,
    options: FplOptions,
    estimate_rng: ChaCha8Rng,
    /// Learner loss so far as seen by a self-confident schedule.
    schedule_loss: f64,
    pending: Option<Pending>,
}

impl FplPredictor {
    pub fn new(
        pool: ExpertPool,
        schedule: Schedule,
        perturbation: Perturbation,
        estimate_rng: ChaCha8Rng,
        options: FplOptions,
    ) -> Result<Self> {
        let n = pool.n();
        if options.ifpl_diagnostic && pool.has_entering_times() {
            return Err(FplError::Unsupported("the infeasible-leader diagnostic with entering times".into()));
        }
        if schedule.loss_source() == Some(LossSource::MonteCarlo) && options.mc_samples == 0 {
            return Err(FplError::param("mc_samples", "must be positive for a Monte Carlo loss source"));
        }
        Ok(Self {
            pool,
            tracker: RateTracker::new(schedule)?,
            perturbation,
            state: GameState::new(n),
            options,
            estimate_rng,
            schedule_loss: 0.0,
            pending: None,
        })
    }

    /// Predictor whose random streams are derived from `(seed, replica)`.
    pub fn seeded(
        pool: ExpertPool,
        schedule: Schedule,
        regime: Regime,
        seed: u64,
        replica: u64,
        options: FplOptions,
    ) -> Result<Self> {
        let perturbation = Perturbation::seeded(regime, pool.n(), seed, replica, lanes::PERTURBATION)?;
        let estimate = substream(seed, replica, lanes::ESTIMATE);
        Self::new(pool, schedule, perturbation, estimate, options)
    }

    pub fn pool(&self) -> &ExpertPool {
        &self.pool
    }

    pub fn schedule(&self) -> &Schedule {
        self.tracker.schedule()
    }

    pub fn regime(&self) -> Regime {
        self.perturbation.regime()
    }

    pub fn last_eta(&self) -> Option<f64> {
        self.tracker.last_eta()
    }

    /// Exact choice probabilities of the pending round, if computed.
    pub fn pending_weights(&self) -> Option<&[f64]> {
        self.pending.as_ref().and_then(|p| p.exact.as_deref())
    }

    fn wants_exact(&self) -> bool {
        self.options.track_expected
            || self.options.ifpl_diagnostic
            || self.tracker.schedule().loss_source() == Some(LossSource::Exact)
    }
}

impl Learner for FplPredictor {
    fn n_experts(&self) -> usize {
        self.pool.n()
    }

    fn decide(&mut self) -> Result<Play> {
        let t = self.state.t() + 1;
        let source = self.tracker.schedule().loss_source();
        let learner_loss_prev = match source {
            Some(LossSource::Actual) => self.state.learner_cum_actual(),
            _ => self.schedule_loss,
        };
        let eta = self.tracker.next(&Observables {
            t,
            learner_loss_prev,
            cum_loss_prev: self.state.cum_loss(),
            min_prev: self.state.cum_min(),
            complexities: self.pool.complexities(),
        })?;
        let q = self.perturbation.for_round();
        let chosen = perturbed_leader(self.state.cum_loss(), t, &self.pool, eta, q)?;

        let needs_score = self.wants_exact() || source == Some(LossSource::MonteCarlo);
        let score = if needs_score {
            Some(penalized(self.state.cum_loss(), t, &self.pool, eta)?)
        } else {
            None
        };
        let exact = match (&score, self.wants_exact()) {
            (Some(s), true) => Some(choice_probabilities(s, eta)?),
            _ => None,
        };
        let estimate = match (&score, source) {
            (Some(s), Some(LossSource::MonteCarlo)) => Some(choice_probabilities_monte_carlo(
                s,
                eta,
                self.options.mc_samples,
                &mut self.estimate_rng,
            )?),
            _ => None,
        };
        self.pending = Some(Pending {
            chosen,
            eta,
            exact,
            estimate,
        });
        Ok(Play {
            chosen,
            eta: Some(eta),
            decision: Decision::Expert(chosen),
        })
    }

    fn observe(&mut self, losses: &LossVector) -> Result<RoundRecord> {
        check_dims(self.pool.n(), losses.len())?;
        let pending = self.pending.take().ok_or(FplError::NoPendingDecision)?;
        let t = self.state.t() + 1;
        let actual = losses.values()[pending.chosen];
        let expected = pending.exact.as_ref().map(|w| losses.dot(w).clamp(0.0, 1.0));
        match self.tracker.schedule().loss_source() {
            Some(LossSource::Exact) => self.schedule_loss += expected.unwrap_or(0.0),
            Some(LossSource::MonteCarlo) => {
                self.schedule_loss += pending.estimate.as_ref().map_or(0.0, |w| losses.dot(w).clamp(0.0, 1.0))
            }
            _ => {}
        }
        let ifpl_loss = if self.options.ifpl_diagnostic {
            let with_current = self.state.clone().accumulated(losses)?;
            let score = penalized(with_current.cum_loss(), t, &self.pool, pending.eta)?;
            let w = choice_probabilities(&score, pending.eta)?;
            Some(losses.dot(&w).clamp(0.0, 1.0))
        } else {
            None
        };
        self.state.accumulate(losses)?;
        let tracked = if self.options.track_expected || self.options.ifpl_diagnostic {
            expected
        } else {
            None
        };
        self.state.record_learner(actual, tracked)?;
        Ok(RoundRecord {
            t,
            eta: Some(pending.eta),
            chosen: pending.chosen,
            actual_loss: actual,
            expected_loss: tracked,
            ifpl_loss,
            cum_best: self.state.cum_min(),
        })
    }

    fn state(&self) -> &GameState {
        &self.state
    }

    fn tracks_expected_loss(&self) -> bool {
        self.options.track_expected || self.options.ifpl_diagnostic
    }

    fn kind(&self) -> &'static str {
        if self.options.ifpl_diagnostic {
            "ifpl"
        } else {
            "fpl"
        }
    }
}

/// Follow the Leader. Deterministic, so `l_t = u_t`.
#[derive(Debug, Clone)]
pub struct FollowTheLeader {
    pool: ExpertPool,
    state: GameState,
    pending: Option<usize>,
}

impl FollowTheLeader {
    pub fn new(pool: ExpertPool) -> Self {
        let n = pool.n();
        Self {
            pool,
            state: GameState::new(n),
            pending: None,
        }
    }
}

impl Learner for FollowTheLeader {
    fn n_experts(&self) -> usize {
        self.pool.n()
    }

    fn decide(&mut self) -> Result<Play> {
        let decision = fl_decide(&self.state, &self.pool)?;
        let Decision::Expert(chosen) = decision else {
            unreachable!("the leader is a single expert")
        };
        self.pending = Some(chosen);
        Ok(Play {
            chosen,
            eta: None,
            decision,
        })
    }

    fn observe(&mut self, losses: &LossVector) -> Result<RoundRecord> {
        check_dims(self.pool.n(), losses.len())?;
        let chosen = self.pending.take().ok_or(FplError::NoPendingDecision)?;
        let u = losses.values()[chosen];
        self.state.accumulate(losses)?;
        self.state.record_learner(u, Some(u))?;
        Ok(RoundRecord {
            t: self.state.t(),
            eta: None,
            chosen,
            actual_loss: u,
            expected_loss: Some(u),
            ifpl_loss: None,
            cum_best: self.state.cum_min(),
        })
    }

    fn state(&self) -> &GameState {
        &self.state
    }

    fn tracks_expected_loss(&self) -> bool {
        true
    }

    fn kind(&self) -> &'static str {
        "fl"
    }
}

/// Plays the FPL choice probabilities as a point of the simplex, so that the
/// incurred loss `w_t . s_t` equals FPL's expected loss.
#[derive(Debug, Clone)]
pub struct DeterministicWeights {
    pool: ExpertPool,
    tracker: RateTracker,
    state: GameState,
    pending: Option<(f64, Vec<f64>)>,
}

impl DeterministicWeights {
    pub fn new(pool: ExpertPool, schedule: Schedule) -> Result<Self> {
        let n = pool.n();
        Ok(Self {
            pool,
            tracker: RateTracker::new(schedule)?,
            state: GameState::new(n),
            pending: None,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        self.tracker.schedule()
    }
}

impl Learner for DeterministicWeights {
    fn n_experts(&self) -> usize {
        self.pool.n()
    }

    fn decide(&mut self) -> Result<Play> {
        let t = self.state.t() + 1;
        // Actual and expected losses coincide, so every loss source reads the same sum.
        let eta = self.tracker.next(&Observables {
            t,
            learner_loss_prev: self.state.learner_cum_actual(),
            cum_loss_prev: self.state.cum_loss(),
            min_prev: self.state.cum_min(),
            complexities: self.pool.complexities(),
        })?;
        let decision = weight_vector(&self.state, &self.pool, eta)?;
        let Decision::Weights(w) = &decision else {
            unreachable!("weight_vector returns simplex weights")
        };
        let chosen = argmax(w);
        self.pending = Some((eta, w.clone()));
        Ok(Play {
            chosen,
            eta: Some(eta),
            decision,
        })
    }

    fn observe(&mut self, losses: &LossVector) -> Result<RoundRecord> {
        check_dims(self.pool.n(), losses.len())?;
        let (eta, w) = self.pending.take().ok_or(FplError::NoPendingDecision)?;
        let u = losses.dot(&w).clamp(0.0, 1.0);
        self.state.accumulate(losses)?;
        self.state.record_learner(u, Some(u))?;
        Ok(RoundRecord {
            t: self.state.t(),
            eta: Some(eta),
            chosen: argmax(&w),
            actual_loss: u,
            expected_loss: Some(u),
            ifpl_loss: None,
            cum_best: self.state.cum_min(),
        })
    }

    fn state(&self) -> &GameState {
        &self.state
    }

    fn tracks_expected_loss(&self) -> bool {
        true
    }

    fn kind(&self) -> &'static str {
        "deterministic-weights"
    }
}

/// Predictor kinds selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    #[default]
    Fpl,
    Ifpl,
    Fl,
    HierarchicalFpl,
    DeterministicWeights,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Fpl => "fpl",
            PredictorKind::Ifpl => "ifpl",
            PredictorKind::Fl => "fl",
            PredictorKind::HierarchicalFpl => "hierarchical-fpl",
            PredictorKind::DeterministicWeights => "deterministic-weights",
        }
    }
}
