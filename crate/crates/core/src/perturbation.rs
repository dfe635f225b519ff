//! Exponential perturbations and statistics of shifted exponential maxima.
//!
//! Random streams come from ChaCha8. A stream is addressed by
//! `(master seed, replica, lane)`: the lane selects the consumer (perturbation,
//! environment, hierarchy class, ...) and is mixed into the 256-bit key with
//! SplitMix64; the replica index selects the ChaCha stream id. Replica `r` of
//! an experiment therefore always sees the same numbers regardless of how many
//! other replicas run, or in which order.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};

/// Lane ids used when deriving substreams.
pub mod lanes {
    pub const PERTURBATION: u64 = 1;
    pub const ENVIRONMENT: u64 = 2;
    pub const ESTIMATE: u64 = 3;
    pub const META: u64 = 4;
    /// Hierarchy class `K` uses lane `CLASS_BASE + K`.
    pub const CLASS_BASE: u64 = 1 << 20;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `(master_seed, replica, lane)`.
pub fn substream(master_seed: u64, replica: u64, lane: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = master_seed ^ splitmix64(lane);
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// One Exp(1) draw by inversion, `-ln u` with `u` in `(0, 1]`.
#[inline]
pub fn sample_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    0.0 - u.ln()
}

pub fn sample_exponential_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(FplError::EmptyPool);
    }
    Ok((0..n).map(|_| sample_exponential(rng)).collect())
}

/// When the perturbation vector is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// One vector `q` drawn before the first round and kept.
    InitialOnce,
    /// A fresh vector `q_t` every round.
    #[default]
    FreshPerStep,
}

/// Perturbation source for one predictor in one replica.
#[derive(Debug, Clone)]
pub struct Perturbation {
    regime: Regime,
    rng: ChaCha8Rng,
    current: Vec<f64>,
    drawn: bool,
}

impl Perturbation {
    pub fn new(regime: Regime, n: usize, rng: ChaCha8Rng) -> Result<Self> {
        if n == 0 {
            return Err(FplError::EmptyPool);
        }
        Ok(Self {
            regime,
            rng,
            current: vec![0.0; n],
            drawn: false,
        })
    }

    pub fn seeded(regime: Regime, n: usize, seed: u64, replica: u64, lane: u64) -> Result<Self> {
        Self::new(regime, n, substream(seed, replica, lane))
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Perturbation for the next round. Call exactly once per round.
    pub fn for_round(&mut self) -> &[f64] {
        if !self.drawn || self.regime == Regime::FreshPerStep {
            for q in self.current.iter_mut() {
                *q = sample_exponential(&mut self.rng);
            }
            self.drawn = true;
        }
        &self.current
    }

    /// The most recent vector; all zeros before the first round.
    pub fn current(&self) -> &[f64] {
        &self.current
    }
}

/// `P[max_i (q_i - k_i) >= a]` for independent Exp(1) components.
pub fn shifted_max_cdf(a: f64, k: &[f64]) -> f64 {
    let below: f64 = k
        .iter()
        .map(|&ki| (1.0 - (-a - ki).exp()).max(0.0))
        .product();
    1.0 - below
}

/// Union bound `min(1, u e^{-a})` with `u = sum_i e^{-k_i}`.
pub fn shifted_max_tail_bound(a: f64, k: &[f64]) -> f64 {
    let u: f64 = k.iter().map(|&ki| (-ki).exp()).sum();
    (u * (-a).exp()).min(1.0)
}

/// Upper bound `1 + ln u` on `E[max_i (q_i - k_i)]`.
pub fn shifted_max_expectation_bound(k: &[f64]) -> f64 {
    let u: f64 = k.iter().map(|&ki| (-ki).exp()).sum();
    1.0 + u.ln()
}

/// Euler–Mascheroni constant, the lower-bound offset for `E[max_i q_i]`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
