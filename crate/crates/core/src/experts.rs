//! Expert pools, loss vectors and the cumulative game state.
//!
//! Experts are indexed from 0 throughout the crate. Every arg min breaks ties
//! toward the lowest index so that runs are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};

/// Slack allowed on the code-length condition `sum_i exp(-k_i) <= 1`.
pub const KRAFT_TOLERANCE: f64 = 1e-12;

/// Tolerance on simplex weights summing to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A finite pool of experts with complexity penalties and entering times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPool {
    complexities: Vec<f64>,
    entering_times: Vec<usize>,
    /// Set when the pool is a truncation of the countable class `k_i = 1/2 + 2 ln i`.
    countable_cap: Option<usize>,
}

impl ExpertPool {
    /// Builds a pool from explicit complexities; all entering times are 1.
    pub fn new(complexities: Vec<f64>) -> Result<Self> {
        if complexities.is_empty() {
            return Err(FplError::EmptyPool);
        }
        for (index, &value) in complexities.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(FplError::InvalidComplexity { index, value });
            }
        }
        let kraft = kraft_sum(&complexities);
        if kraft > 1.0 + KRAFT_TOLERANCE {
            return Err(FplError::KraftViolation(kraft));
        }
        let n = complexities.len();
        Ok(Self {
            complexities,
            entering_times: vec![1; n],
            countable_cap: None,
        })
    }

    /// Uniform complexities `k_i = ln n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FplError::EmptyPool);
        }
        Self::new(vec![(n as f64).ln(); n])
    }

    /// The first `cap` experts of the countable class with `k_i = 1/2 + 2 ln i`.
    pub fn countable(cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(FplError::EmptyPool);
        }
        let k = (1..=cap).map(countable_complexity).collect();
        let mut pool = Self::new(k)?;
        pool.countable_cap = Some(cap);
        Ok(pool)
    }

    /// Countable pool in finitized mode: expert `i` enters at round `ceil(k_i)`.
    pub fn countable_finitized(cap: usize) -> Result<Self> {
        let pool = Self::countable(cap)?;
        let tau = pool
            .complexities
            .iter()
            .map(|&k| (k.ceil() as usize).max(1))
            .collect();
        pool.with_entering_times(tau)
    }

    pub fn with_entering_times(mut self, entering_times: Vec<usize>) -> Result<Self> {
        if entering_times.len() != self.complexities.len() {
            return Err(FplError::DimensionMismatch {
                expected: self.complexities.len(),
                got: entering_times.len(),
            });
        }
        if let Some(index) = entering_times.iter().position(|&tau| tau == 0) {
            return Err(FplError::InvalidEnteringTime { index });
        }
        self.entering_times = entering_times;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.complexities.len()
    }

    pub fn complexities(&self) -> &[f64] {
        &self.complexities
    }

    pub fn entering_times(&self) -> &[usize] {
        &self.entering_times
    }

    pub fn countable_cap(&self) -> Option<usize> {
        self.countable_cap
    }

    /// Whether expert `i` may be chosen at (1-based) round `t`.
    pub fn is_active(&self, i: usize, t: usize) -> bool {
        self.entering_times[i] <= t
    }

    pub fn has_entering_times(&self) -> bool {
        self.entering_times.iter().any(|&tau| tau > 1)
    }

    pub fn kraft_sum(&self) -> f64 {
        kraft_sum(&self.complexities)
    }

    pub fn max_complexity(&self) -> f64 {
        self.complexities.iter().copied().fold(0.0, f64::max)
    }

    /// The common complexity when all experts share one.
    pub fn uniform_complexity(&self) -> Option<f64> {
        let first = self.complexities[0];
        self.complexities
            .iter()
            .all(|&k| k == first)
            .then_some(first)
    }
}

/// `1/2 + 2 ln i` for the 1-based expert number `i`.
pub fn countable_complexity(i: usize) -> f64 {
    0.5 + 2.0 * (i as f64).ln()
}

pub fn kraft_sum(complexities: &[f64]) -> f64 {
    complexities.iter().map(|&k| (-k).exp()).sum()
}

/// One round of expert losses, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FplError::EmptyPool);
        }
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(FplError::LossOutOfRange { index, value });
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Loss 1 on expert `i`, 0 elsewhere.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Losses of the experts at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LossVector {
        LossVector(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(s, w)| s * w).sum()
    }
}

impl TryFrom<Vec<f64>> for LossVector {
    type Error = FplError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LossVector> for Vec<f64> {
    fn from(v: LossVector) -> Self {
        v.0
    }
}

/// Cumulative losses of the experts and the learner after `t` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    t: usize,
    cum_loss: Vec<f64>,
    cum_min: f64,
    learner_cum_expected: f64,
    learner_cum_actual: f64,
}

impl GameState {
    pub fn new(n: usize) -> Self {
        Self {
            t: 0,
            cum_loss: vec![0.0; n],
            cum_min: 0.0,
            learner_cum_expected: 0.0,
            learner_cum_actual: 0.0,
        }
    }

    /// Number of completed rounds.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.cum_loss.len()
    }

    /// `s_{1:t}`, which is `s_{<t+1}` for the upcoming round.
    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    pub fn cum_min(&self) -> f64 {
        self.cum_min
    }

    /// Cumulative expected learner loss; stays 0 unless expected losses are recorded.
    pub fn learner_cum_expected(&self) -> f64 {
        self.learner_cum_expected
    }

    pub fn learner_cum_actual(&self) -> f64 {
        self.learner_cum_actual
    }

    /// Adds one round of expert losses.
    pub fn accumulate(&mut self, losses: &LossVector) -> Result<()> {
        if losses.len() != self.cum_loss.len() {
            return Err(FplError::DimensionMismatch {
                expected: self.cum_loss.len(),
                got: losses.len(),
            });
        }
        for (c, s) in self.cum_loss.iter_mut().zip(losses.values()) {
            *c += s;
        }
        self.cum_min = self.cum_loss.iter().copied().fold(f64::INFINITY, f64::min);
        self.t += 1;
        Ok(())
    }

    /// Value-returning form of [`GameState::accumulate`].
    pub fn accumulated(mut self, losses: &LossVector) -> Result<Self> {
        self.accumulate(losses)?;
        Ok(self)
    }

    /// Records the learner's loss for the round just accumulated.
    pub fn record_learner(&mut self, actual: f64, expected: Option<f64>) -> Result<()> {
        if !(0.0..=1.0).contains(&actual) {
            return Err(FplError::param("learner loss", format!("{actual} outside [0, 1]")));
        }
        self.learner_cum_actual += actual;
        if let Some(e) = expected {
            if !(-1e-9..=1.0 + 1e-9).contains(&e) {
                return Err(FplError::param("expected loss", format!("{e} outside [0, 1]")));
            }
            self.learner_cum_expected += e.clamp(0.0, 1.0);
        }
        Ok(())
    }
}

/// A round's decision: a single expert, or a point of the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Expert(usize),
    Weights(Vec<f64>),
}

impl Decision {
    pub fn weights(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(FplError::param("weight", format!("{bad} outside [0, 1]")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(FplError::param("weights", format!("sum {total} is not 1")));
        }
        Ok(Decision::Weights(w))
    }

    /// Loss `d . s_t` incurred by the decision.
    pub fn loss(&self, losses: &LossVector) -> f64 {
        match self {
            Decision::Expert(i) => losses.values()[*i],
            Decision::Weights(w) => losses.dot(w),
        }
    }
}

/// Lowest-index arg min of `score` over `indices`.
pub(crate) fn argmin_by<I, F>(indices: I, score: F) -> Option<usize>
where
    I: IntoIterator<Item = usize>,
    F: Fn(usize) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for i in indices {
        let v = score(i);
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Index and loss of the best expert in hindsight after `state.t()` rounds.
pub fn best_expert_in_hindsight(state: &GameState) -> Result<(usize, f64)> {
    if state.t() == 0 {
        return Err(FplError::EmptyHistory);
    }
    let cum = state.cum_loss();
    let i = argmin_by(0..cum.len(), |i| cum[i]).ok_or(FplError::EmptyPool)?;
    Ok((i, cum[i]))
}
