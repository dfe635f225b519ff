//! Learning-rate schedules.
//!
//! Every schedule is a pure function of observables handed in by the caller
//! (round index, learner loss so far, expert losses so far). [`RateTracker`]
//! wraps a schedule and enforces that observables never decrease and the
//! emitted rate never increases.

use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};

/// `eta = 1/sqrt(L)`.
pub fn eta_static_unit(l: f64) -> Result<f64> {
    check_positive("L", l)?;
    Ok(1.0 / l.sqrt())
}

/// `eta = sqrt(K/L)`.
pub fn eta_static_k(k: f64, l: f64) -> Result<f64> {
    check_positive("K", k)?;
    check_positive("L", l)?;
    Ok((k / l).sqrt())
}

/// `eta = sqrt(k_i/L)` given only the ratio `k_i/L`.
pub fn eta_static_ratio(ratio: f64) -> Result<f64> {
    check_positive("ratio k/L", ratio)?;
    Ok(ratio.sqrt())
}

/// `1/sqrt(t)`, or `sqrt(K/2t)` when `k` is given.
pub fn eta_dynamic_t(t: usize, k: Option<f64>) -> Result<f64> {
    if t == 0 {
        return Err(FplError::param("t", "rounds start at 1"));
    }
    let t = t as f64;
    match k {
        None => Ok(1.0 / t.sqrt()),
        Some(k) => {
            check_positive("K", k)?;
            Ok((k / (2.0 * t)).sqrt())
        }
    }
}

/// Self-confident rate `1/sqrt(2(L+1))` or `sqrt(K/2(L+1))` where `L` is the
/// learner's loss before the current round.
pub fn eta_self_confident(loss_prev: f64, k: Option<f64>) -> Result<f64> {
    if !(loss_prev >= 0.0) || !loss_prev.is_finite() {
        return Err(FplError::param("learner loss", format!("{loss_prev} is not a nonnegative number")));
    }
    let denom = 2.0 * (loss_prev + 1.0);
    match k {
        None => Ok(1.0 / denom.sqrt()),
        Some(k) => {
            check_positive("K", k)?;
            Ok((k / denom).sqrt())
        }
    }
}

/// `1 / min_i (k_i + sqrt(k_i^2 + 2 s_i + 2))` over past expert losses `s_i`.
pub fn eta_adaptive_min_penalized(cum_loss_prev: &[f64], complexities: &[f64]) -> Result<f64> {
    if cum_loss_prev.is_empty() {
        return Err(FplError::EmptyPool);
    }
    if cum_loss_prev.len() != complexities.len() {
        return Err(FplError::DimensionMismatch {
            expected: complexities.len(),
            got: cum_loss_prev.len(),
        });
    }
    let m = cum_loss_prev
        .iter()
        .zip(complexities)
        .map(|(&s, &k)| k + (k * k + 2.0 * s + 2.0).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 / m)
}

/// `sqrt(1/2) * min(1, sqrt(K / s_min))` over the best past expert loss.
pub fn eta_adaptive_smin(s_min_prev: f64, k: f64) -> Result<f64> {
    check_positive("K", k)?;
    if !(s_min_prev >= 0.0) {
        return Err(FplError::param("s_min", format!("{s_min_prev} is negative")));
    }
    let factor = if s_min_prev <= k { 1.0 } else { (k / s_min_prev).sqrt() };
    Ok(std::f64::consts::FRAC_1_SQRT_2 * factor)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FplError::param(name, format!("{v} must be positive and finite")))
    }
}

/// Where a self-confident schedule reads the learner's past loss from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossSource {
    /// Exact expectation `l_{<t}` from the choice probabilities.
    #[default]
    Exact,
    /// Monte Carlo estimate of `l_{<t}`.
    MonteCarlo,
    /// Realized loss `u_{<t}`.
    Actual,
}

/// A learning-rate rule with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `1/sqrt(L)`; `L` defaults to the horizon.
    StaticL { l: Option<f64> },
    /// `sqrt(K/L)`; `L` defaults to the horizon.
    StaticKl { k: f64, l: Option<f64> },
    /// `sqrt(k_i/L)` from the ratio alone.
    StaticRatio { ratio: f64 },
    DynamicT,
    DynamicKt { k: f64 },
    SelfConfident {
        #[serde(default)]
        source: LossSource,
    },
    SelfConfidentK {
        k: f64,
        #[serde(default)]
        source: LossSource,
    },
    AdaptiveMinPenalized,
    AdaptiveSminK { k: f64 },
}

/// What a schedule may look at before round `t`.
#[derive(Debug, Clone, Copy)]
pub struct Observables<'a> {
    /// The round about to be played, starting at 1.
    pub t: usize,
    /// Learner loss before round `t`, from the schedule's [`LossSource`].
    pub learner_loss_prev: f64,
    /// `s_{<t}` per expert.
    pub cum_loss_prev: &'a [f64],
    /// `min_i s_{<t}^i`.
    pub min_prev: f64,
    pub complexities: &'a [f64],
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::StaticL { .. } => "static-l",
            Schedule::StaticKl { .. } => "static-kl",
            Schedule::StaticRatio { .. } => "static-ratio",
            Schedule::DynamicT => "dynamic-t",
            Schedule::DynamicKt { .. } => "dynamic-kt",
            Schedule::SelfConfident { .. } => "self-confident",
            Schedule::SelfConfidentK { .. } => "self-confident-k",
            Schedule::AdaptiveMinPenalized => "adaptive-min-penalized",
            Schedule::AdaptiveSminK { .. } => "adaptive-smin-k",
        }
    }

    /// Fills in `L = horizon` for static schedules that left it open.
    pub fn resolved(self, horizon: usize) -> Self {
        let h = Some(horizon as f64);
        match self {
            Schedule::StaticL { l: None } => Schedule::StaticL { l: h },
            Schedule::StaticKl { k, l: None } => Schedule::StaticKl { k, l: h },
            other => other,
        }
    }

    /// The complexity bound `K` the schedule was built with.
    pub fn k_bound(&self) -> Option<f64> {
        match *self {
            Schedule::StaticKl { k, .. }
            | Schedule::DynamicKt { k }
            | Schedule::SelfConfidentK { k, .. }
            | Schedule::AdaptiveSminK { k } => Some(k),
            _ => None,
        }
    }

    /// The loss horizon `L` of a static schedule.
    pub fn l_bound(&self) -> Option<f64> {
        match *self {
            Schedule::StaticL { l } | Schedule::StaticKl { l, .. } => l,
            _ => None,
        }
    }

    /// Loss source for self-confident schedules.
    pub fn loss_source(&self) -> Option<LossSource> {
        match *self {
            Schedule::SelfConfident { source } | Schedule::SelfConfidentK { source, .. } => Some(source),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::StaticL { l } => l.map_or(Ok(()), |l| check_positive("L", l)),
            Schedule::StaticKl { k, l } => {
                check_positive("K", k)?;
                l.map_or(Ok(()), |l| check_positive("L", l))
            }
            Schedule::StaticRatio { ratio } => check_positive("ratio k/L", ratio),
            Schedule::DynamicKt { k } | Schedule::SelfConfidentK { k, .. } | Schedule::AdaptiveSminK { k } => {
                check_positive("K", k)
            }
            _ => Ok(()),
        }
    }

    /// The rate for the round described by `obs`.
    pub fn eta(&self, obs: &Observables<'_>) -> Result<f64> {
        match *self {
            Schedule::StaticL { l } => eta_static_unit(l.ok_or_else(missing_l)?),
            Schedule::StaticKl { k, l } => eta_static_k(k, l.ok_or_else(missing_l)?),
            Schedule::StaticRatio { ratio } => eta_static_ratio(ratio),
            Schedule::DynamicT => eta_dynamic_t(obs.t, None),
            Schedule::DynamicKt { k } => eta_dynamic_t(obs.t, Some(k)),
            Schedule::SelfConfident { .. } => eta_self_confident(obs.learner_loss_prev, None),
            Schedule::SelfConfidentK { k, .. } => eta_self_confident(obs.learner_loss_prev, Some(k)),
            Schedule::AdaptiveMinPenalized => eta_adaptive_min_penalized(obs.cum_loss_prev, obs.complexities),
            Schedule::AdaptiveSminK { k } => eta_adaptive_smin(obs.min_prev, k),
        }
    }
}

fn missing_l() -> FplError {
    FplError::param("L", "static schedule needs a loss horizon; call `resolved`")
}

/// Stateful wrapper that checks monotonicity round by round.
#[derive(Debug, Clone)]
pub struct RateTracker {
    schedule: Schedule,
    last_t: usize,
    last_learner: f64,
    last_min: f64,
    last_cum: Vec<f64>,
    last_eta: Option<f64>,
    inverse_steps: Vec<f64>,
}

impl RateTracker {
    pub fn new(schedule: Schedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            schedule,
            last_t: 0,
            last_learner: 0.0,
            last_min: 0.0,
            last_cum: Vec::new(),
            last_eta: None,
            inverse_steps: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn last_eta(&self) -> Option<f64> {
        self.last_eta
    }

    /// `1/eta_t - 1/eta_{t-1}` for every round so far, with `1/eta_0 = 0`.
    pub fn inverse_increments(&self) -> &[f64] {
        &self.inverse_steps
    }

    pub fn next(&mut self, obs: &Observables<'_>) -> Result<f64> {
        const SLACK: f64 = 1e-12;
        if obs.t <= self.last_t {
            return Err(FplError::ObservableDecreased("t"));
        }
        if obs.learner_loss_prev < self.last_learner - SLACK {
            return Err(FplError::ObservableDecreased("learner loss"));
        }
        if obs.min_prev < self.last_min - SLACK {
            return Err(FplError::ObservableDecreased("s_min"));
        }
        if !self.last_cum.is_empty()
            && obs
                .cum_loss_prev
                .iter()
                .zip(&self.last_cum)
                .any(|(now, before)| *now < before - SLACK)
        {
            return Err(FplError::ObservableDecreased("s_<t"));
        }
        let eta = self.schedule.eta(obs)?;
        if let Some(previous) = self.last_eta {
            if eta > previous + SLACK {
                return Err(FplError::RateIncreased { previous, next: eta });
            }
        }
        let inv_prev = self.last_eta.map_or(0.0, |e| 1.0 / e);
        self.inverse_steps.push(1.0 / eta - inv_prev);
        self.last_t = obs.t;
        self.last_learner = obs.learner_loss_prev;
        self.last_min = obs.min_prev;
        self.last_cum.clear();
        self.last_cum.extend_from_slice(obs.cum_loss_prev);
        self.last_eta = Some(eta);
        Ok(eta)
    }
}
