//! Loss generators: fixed sequences, the alternating sequence that defeats
//! Follow the Leader, Bernoulli losses and adaptive adversaries.
//!
//! Environments receive the round number `t` (from 1) and the learner's past
//! choices `I_1, ..., I_{t-1}`. Oblivious kinds check the history length and
//! otherwise ignore it.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};
use crate::experts::LossVector;
use crate::perturbation::{lanes, substream};

pub trait Environment: Send {
    fn n(&self) -> usize;

    /// Whether losses may depend on the decision history.
    fn is_adaptive(&self) -> bool;

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector>;
}

fn check_history(t: usize, history: &[usize]) -> Result<()> {
    if t == 0 {
        return Err(FplError::param("t", "rounds start at 1"));
    }
    if history.len() != t - 1 {
        return Err(FplError::HistoryLength {
            expected: t - 1,
            got: history.len(),
        });
    }
    Ok(())
}

/// A fixed loss sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSequence {
    rows: Vec<LossVector>,
}

impl FixedSequence {
    pub fn new(rows: Vec<LossVector>) -> Result<Self> {
        let n = rows.first().ok_or(FplError::EmptyHistory)?.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(FplError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(LossVector::new).collect::<Result<_>>()?)
    }

    /// Reads one round per line and one expert per column, without a header.
    /// Lines starting with `#` are skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .map_err(|e| FplError::Config(format!("loss row {}: `{field}`: {e}", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Environment for FixedSequence {
    fn n(&self) -> usize {
        self.rows[0].len()
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector> {
        check_history(t, history)?;
        self.rows.get(t - 1).cloned().ok_or(FplError::HorizonExceeded {
            requested: t,
            available: self.rows.len(),
        })
    }
}

/// Two experts with losses `0, 1, 0, 1, ...` and `1/2, 0, 1, 0, ...`.
/// Follow the Leader picks the expert about to lose in every round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlKiller;

impl FlKiller {
    pub fn new(n: usize) -> Result<Self> {
        if n == 2 {
            Ok(Self)
        } else {
            Err(FplError::param("n", format!("the alternating sequence needs 2 experts, got {n}")))
        }
    }

    pub fn losses_at(t: usize) -> [f64; 2] {
        match t {
            1 => [0.0, 0.5],
            t if t % 2 == 0 => [1.0, 0.0],
            _ => [0.0, 1.0],
        }
    }
}

impl Environment for FlKiller {
    fn n(&self) -> usize {
        2
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector> {
        check_history(t, history)?;
        LossVector::new(Self::losses_at(t).to_vec())
    }
}

/// Independent 0/1 losses with `P[s_t^i = 1] = p_i`.
///
/// Round `t` reads a fixed window of the ChaCha stream, so the losses are a
/// function of `(seed, replica, t)` alone.
#[derive(Debug, Clone)]
pub struct Bernoulli {
    p: Vec<f64>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Bernoulli {
    pub fn new(p: Vec<f64>, seed: u64, replica: u64) -> Result<Self> {
        if p.is_empty() {
            return Err(FplError::EmptyPool);
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(FplError::param("p", format!("{bad} is not a probability")));
        }
        Ok(Self {
            p,
            rng: substream(seed, replica, lanes::ENVIRONMENT),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

impl Environment for Bernoulli {
    fn n(&self) -> usize {
        self.p.len()
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector> {
        check_history(t, history)?;
        // Each f64 draw consumes two 32-bit words.
        self.rng.set_word_pos((t as u128 - 1) * self.p.len() as u128 * 2);
        let rng = &mut self.rng;
        let row = self
            .p
            .iter()
            .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        LossVector::new(row)
    }
}

/// Adaptive adversary: loss 1 on the previously chosen expert, 0 elsewhere.
/// The first round is all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LastChoicePunisher {
    n: usize,
}

impl LastChoicePunisher {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FplError::EmptyPool);
        }
        Ok(Self { n })
    }
}

impl Environment for LastChoicePunisher {
    fn n(&self) -> usize {
        self.n
    }

    fn is_adaptive(&self) -> bool {
        true
    }

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector> {
        check_history(t, history)?;
        match history.last() {
            None => Ok(LossVector::zeros(self.n)),
            Some(&i) if i < self.n => Ok(LossVector::unit(self.n, i)),
            Some(&i) => Err(FplError::param("history", format!("expert {i} out of range"))),
        }
    }
}

type Transition = dyn Fn(usize, &[usize]) -> Result<LossVector> + Send + Sync;

/// A user-supplied pure transition `(t, I_{<t}) -> s_t`.
pub struct CustomAdaptive {
    n: usize,
    transition: Box<Transition>,
}

impl CustomAdaptive {
    pub fn new<F>(n: usize, transition: F) -> Result<Self>
    where
        F: Fn(usize, &[usize]) -> Result<LossVector> + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(FplError::EmptyPool);
        }
        Ok(Self {
            n,
            transition: Box::new(transition),
        })
    }
}

impl fmt::Debug for CustomAdaptive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomAdaptive").field("n", &self.n).finish_non_exhaustive()
    }
}

impl Environment for CustomAdaptive {
    fn n(&self) -> usize {
        self.n
    }

    fn is_adaptive(&self) -> bool {
        true
    }

    fn next_losses(&mut self, t: usize, history: &[usize]) -> Result<LossVector> {
        check_history(t, history)?;
        let losses = (self.transition)(t, history)?;
        if losses.len() != self.n {
            return Err(FplError::DimensionMismatch {
                expected: self.n,
                got: losses.len(),
            });
        }
        Ok(losses)
    }
}

/// Bernoulli parameter: one value for all experts or one per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BernoulliP {
    Common(f64),
    PerExpert(Vec<f64>),
}

impl BernoulliP {
    pub fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            BernoulliP::Common(p) => Ok(vec![*p; n]),
            BernoulliP::PerExpert(v) if v.len() == n => Ok(v.clone()),
            BernoulliP::PerExpert(v) => Err(FplError::DimensionMismatch {
                expected: n,
                got: v.len(),
            }),
        }
    }
}

/// Serializable description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// A sequence from a CSV file, or given inline as rows.
    Fixed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        rows: Vec<Vec<f64>>,
    },
    FlKiller,
    Bernoulli {
        p: BernoulliP,
        /// Every replica sees the same sequence.
        #[serde(default)]
        shared_sequence: bool,
    },
    LastChoicePunisher,
}

impl EnvironmentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvironmentSpec::Fixed { .. } => "fixed",
            EnvironmentSpec::FlKiller => "fl-killer",
            EnvironmentSpec::Bernoulli { .. } => "bernoulli",
            EnvironmentSpec::LastChoicePunisher => "last-choice-punisher",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, EnvironmentSpec::LastChoicePunisher)
    }

    /// Whether every replica faces the same loss sequence.
    pub fn is_replica_invariant(&self) -> bool {
        match self {
            EnvironmentSpec::Fixed { .. } | EnvironmentSpec::FlKiller => true,
            EnvironmentSpec::Bernoulli { shared_sequence, .. } => *shared_sequence,
            EnvironmentSpec::LastChoicePunisher => false,
        }
    }

    pub fn build(&self, n: usize, seed: u64, replica: u64) -> Result<Box<dyn Environment>> {
        let env: Box<dyn Environment> = match self {
            EnvironmentSpec::Fixed { path, rows } => {
                let seq = match (path, rows.is_empty()) {
                    (Some(p), true) => FixedSequence::from_csv(p)?,
                    (None, false) => FixedSequence::from_rows(rows.clone())?,
                    _ => {
                        return Err(FplError::Config(
                            "fixed environment needs exactly one of `path` or `rows`".into(),
                        ))
                    }
                };
                if seq.n() != n {
                    return Err(FplError::DimensionMismatch {
                        expected: n,
                        got: seq.n(),
                    });
                }
                Box::new(seq)
            }
            EnvironmentSpec::FlKiller => Box::new(FlKiller::new(n)?),
            EnvironmentSpec::Bernoulli { p, shared_sequence } => {
                let replica = if *shared_sequence { 0 } else { replica };
                Box::new(Bernoulli::new(p.expand(n)?, seed, replica)?)
            }
            EnvironmentSpec::LastChoicePunisher => Box::new(LastChoicePunisher::new(n)?),
        };
        Ok(env)
    }
}
