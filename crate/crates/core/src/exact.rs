//! Exact choice probabilities of FPL for a single round.
//!
//! With penalized scores `s = s_{<t} + k/eta` and `a_j = exp(-eta (s_j - s_min))`,
//! the probability that expert `i` is the perturbed leader is
//!
//! ```text
//! P[I = i] = a_i * integral_0^1 prod_{j != i} (1 - a_j v) dv
//!          = sum_{M containing i} (-1)^{|M|-1} / |M| * prod_{j in M} a_j
//! ```
//!
//! The first form is evaluated by Gauss–Legendre quadrature, the second by
//! inclusion–exclusion over subsets. Experts with an infinite score (not yet
//! entered) get `a_j = 0` and drop out of both.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{FplError, Result};
use crate::experts::{argmin_by, LossVector};
use crate::perturbation::sample_exponential;

/// Largest pool handled by the subset sum by default.
pub const DEFAULT_SUBSET_CAP: usize = 15;
/// Absolute per-component tolerance of the quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Largest raw normalization error the quadrature silently corrects.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-7;

/// Penalized scores `s_{<t} + k/eta`. Entries may be `+inf` for inactive experts.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedScore {
    values: Vec<f64>,
    min: f64,
}

impl PenalizedScore {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FplError::EmptyPool);
        }
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(FplError::param("score", format!("{bad} is not a valid score")));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(FplError::NoActiveExperts(0));
        }
        Ok(Self { values, min })
    }

    /// Scores `cum + k/eta`, with `+inf` where `active` is false.
    pub fn from_losses(cum: &[f64], complexities: &[f64], eta: f64, active: impl Fn(usize) -> bool) -> Result<Self> {
        if cum.len() != complexities.len() {
            return Err(FplError::DimensionMismatch {
                expected: complexities.len(),
                got: cum.len(),
            });
        }
        let values = cum
            .iter()
            .zip(complexities)
            .enumerate()
            .map(|(i, (&s, &k))| if active(i) { s + k / eta } else { f64::INFINITY })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Number of experts with a finite score.
    pub fn active_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    fn gaps(&self, eta: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|&s| if s.is_finite() { (-eta * (s - self.min)).exp() } else { 0.0 })
            .collect()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(FplError::param("eta", format!("{eta} must be positive and finite")))
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Inclusion–exclusion over subsets, capped at [`DEFAULT_SUBSET_CAP`] active experts.
pub fn choice_probabilities_subset_sum(score: &PenalizedScore, eta: f64) -> Result<Vec<f64>> {
    choice_probabilities_subset_sum_with_cap(score, eta, DEFAULT_SUBSET_CAP)
}

pub fn choice_probabilities_subset_sum_with_cap(score: &PenalizedScore, eta: f64, cap: usize) -> Result<Vec<f64>> {
    check_eta(eta)?;
    let active: Vec<usize> = (0..score.n()).filter(|&i| score.values[i].is_finite()).collect();
    let m = active.len();
    if m > cap {
        return Err(FplError::SubsetCapExceeded { n: m, cap });
    }
    let gaps = score.gaps(eta);
    let x: Vec<f64> = active.iter().map(|&i| gaps[i]).collect();

    // Subset products via the lowest set bit: prod[M] = prod[M - low] * x[low].
    let subsets = 1usize << m;
    let mut prod = vec![1.0f64; subsets];
    // Per expert, compensated sums of subset products grouped by subset size.
    let mut by_size = vec![Compensated::default(); m * (m + 1)];
    for mask in 1..subsets {
        let low = mask.trailing_zeros() as usize;
        let p = prod[mask & (mask - 1)] * x[low];
        prod[mask] = p;
        if p == 0.0 {
            continue;
        }
        let size = mask.count_ones() as usize;
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            by_size[j * (m + 1) + size].add(p);
            bits &= bits - 1;
        }
    }

    let mut out = vec![0.0; score.n()];
    for (slot, &i) in active.iter().enumerate() {
        let mut total = Compensated::default();
        for size in 1..=m {
            let term = by_size[slot * (m + 1) + size].value() / size as f64;
            total.add(if size % 2 == 1 { term } else { -term });
        }
        out[i] = total.value().clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug)]
struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new(m: usize) -> Self {
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_m.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pm = if m == 1 { x } else { p1 };
                let pm1 = if m == 1 { 1.0 } else { p0 };
                dp = mf * (x * pm - pm1) / (x * x - 1.0);
                let dx = pm / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map [-1, 1] to [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[m - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[m - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }
}

/// Node counts tried in order; each level doubles the previous one.
const QUADRATURE_LEVELS: [usize; 10] = [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

fn rule(level: usize) -> &'static GaussLegendre {
    static RULES: [OnceLock<GaussLegendre>; 10] = [const { OnceLock::new() }; 10];
    RULES[level].get_or_init(|| GaussLegendre::new(QUADRATURE_LEVELS[level]))
}

fn integrate(gaps: &[f64], rule: &GaussLegendre, prefix: &mut [f64], out: &mut [f64]) {
    let n = gaps.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (&v, &w) in rule.nodes.iter().zip(&rule.weights) {
        // prefix[j] = prod_{l<j} (1 - a_l v); the suffix runs backwards.
        prefix[0] = 1.0;
        for j in 0..n {
            prefix[j + 1] = prefix[j] * (1.0 - gaps[j] * v);
        }
        let mut suffix = 1.0;
        for j in (0..n).rev() {
            if gaps[j] > 0.0 {
                out[j] += w * gaps[j] * prefix[j] * suffix;
            }
            suffix *= 1.0 - gaps[j] * v;
        }
    }
}

/// Probabilities by adaptive Gauss–Legendre quadrature of the one-dimensional
/// integral, doubling the node count from 8 until successive levels agree to
/// [`QUADRATURE_TOLERANCE`] in every component.
pub fn choice_probabilities_quadrature(score: &PenalizedScore, eta: f64) -> Result<Vec<f64>> {
    check_eta(eta)?;
    let gaps = score.gaps(eta);
    let n = gaps.len();
    let mut prefix = vec![0.0; n + 1];
    let mut previous = vec![0.0; n];
    let mut current = vec![0.0; n];
    integrate(&gaps, rule(0), &mut prefix, &mut previous);
    let mut change = f64::INFINITY;
    for level in 1..QUADRATURE_LEVELS.len() {
        integrate(&gaps, rule(level), &mut prefix, &mut current);
        change = previous
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change <= QUADRATURE_TOLERANCE {
            let total: f64 = current.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(FplError::NormalizationDefect(total));
            }
            return Ok(current.iter().map(|p| (p / total).clamp(0.0, 1.0)).collect());
        }
        std::mem::swap(&mut previous, &mut current);
    }
    Err(FplError::QuadratureNonConvergence {
        nodes: QUADRATURE_LEVELS[QUADRATURE_LEVELS.len() - 1],
        change,
    })
}

/// Subset sum when the active pool fits under the cap, quadrature otherwise.
pub fn choice_probabilities(score: &PenalizedScore, eta: f64) -> Result<Vec<f64>> {
    if score.active_count() <= DEFAULT_SUBSET_CAP {
        choice_probabilities_subset_sum(score, eta)
    } else {
        choice_probabilities_quadrature(score, eta)
    }
}

/// Frequencies of the perturbed arg min over `samples` draws.
pub fn choice_probabilities_monte_carlo<R: Rng + ?Sized>(
    score: &PenalizedScore,
    eta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_eta(eta)?;
    if samples == 0 {
        return Err(FplError::param("samples", "must be positive"));
    }
    let n = score.n();
    let mut counts = vec![0usize; n];
    let mut q = vec![0.0; n];
    for _ in 0..samples {
        q.iter_mut().for_each(|x| *x = sample_exponential(rng));
        let i = argmin_by(0..n, |i| score.values[i] - q[i] / eta).ok_or(FplError::EmptyPool)?;
        counts[i] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / samples as f64).collect())
}

/// `l_t = sum_i P[I_t = i] s_t^i`.
pub fn expected_loss(score: &PenalizedScore, eta: f64, losses: &LossVector) -> Result<f64> {
    if losses.len() != score.n() {
        return Err(FplError::DimensionMismatch {
            expected: score.n(),
            got: losses.len(),
        });
    }
    let w = choice_probabilities(score, eta)?;
    Ok(losses.dot(&w).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::substream;

    fn score(v: &[f64]) -> PenalizedScore {
        PenalizedScore::new(v.to_vec()).unwrap()
    }

    /// Two experts, scores (0, 1), eta = 1: P[1] = 1 - e^{-1}/2.
    fn two_expert_reference() -> f64 {
        1.0 - (-1f64).exp() / 2.0
    }

    #[test]
    fn subset_sum_examples() {
        let p = choice_probabilities_subset_sum(&score(&[2.0, 2.0, 2.0]), 0.7).unwrap();
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let p = choice_probabilities_subset_sum(&score(&[0.0, 1.0]), 1.0).unwrap();
        assert!((p[0] - two_expert_reference()).abs() < 1e-15);
        assert!((p[0] - 0.816060).abs() < 1e-6);
        assert_eq!(choice_probabilities_subset_sum(&score(&[3.0]), 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn subset_sum_cap() {
        let s = score(&[0.0; 16]);
        assert!(matches!(
            choice_probabilities_subset_sum(&s, 1.0),
            Err(FplError::SubsetCapExceeded { n: 16, cap: 15 })
        ));
        let p = choice_probabilities(&s, 1.0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_examples() {
        let p = choice_probabilities_quadrature(&score(&[0.0, 1.0]), 1.0).unwrap();
        assert!((p[0] - two_expert_reference()).abs() < 1e-9);
        assert_eq!(choice_probabilities_quadrature(&score(&[0.0]), 2.0).unwrap(), vec![1.0]);

        let mut rng = substream(1, 0, 77);
        let v: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 20.0).collect();
        let p = choice_probabilities_quadrature(&score(&v), 0.3).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn inactive_experts_get_zero() {
        let s = score(&[0.0, f64::INFINITY, 1.0]);
        let a = choice_probabilities_subset_sum(&s, 1.0).unwrap();
        let b = choice_probabilities_quadrature(&s, 1.0).unwrap();
        assert_eq!(a[1], 0.0);
        assert_eq!(b[1], 0.0);
        assert!((a[0] - two_expert_reference()).abs() < 1e-14);
        assert!(PenalizedScore::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn expected_loss_examples() {
        let s = score(&[0.0, 1.0]);
        let ones = LossVector::new(vec![1.0, 1.0]).unwrap();
        assert!((expected_loss(&s, 1.0, &ones).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(expected_loss(&s, 1.0, &LossVector::zeros(2)).unwrap(), 0.0);
        let second = LossVector::new(vec![0.0, 1.0]).unwrap();
        let l = expected_loss(&s, 1.0, &second).unwrap();
        assert!((l - (-1f64).exp() / 2.0).abs() < 1e-15);
        assert!((l - 0.1839).abs() < 1e-4);
    }

    #[test]
    fn monte_carlo_agreement() {
        // Independent oracle: sample the perturbed arg min directly.
        let cases: [(&[f64], f64); 3] = [
            (&[0.0, 1.0], 1.0),
            (&[0.5, 0.0, 2.0, 1.0], 0.8),
            (&[3.0, 1.0, 4.0, 1.5, 5.0, 9.0], 0.4),
        ];
        let mut rng = substream(2024, 0, 5);
        let draws = 400_000;
        for (v, eta) in cases {
            let s = score(v);
            let exact = choice_probabilities_subset_sum(&s, eta).unwrap();
            let quad = choice_probabilities_quadrature(&s, eta).unwrap();
            let mut counts = vec![0usize; v.len()];
            for _ in 0..draws {
                let i = (0..v.len())
                    .map(|i| (i, v[i] - sample_exponential(&mut rng) / eta))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap()
                    .0;
                counts[i] += 1;
            }
            for i in 0..v.len() {
                let f = counts[i] as f64 / draws as f64;
                let se = (exact[i] * (1.0 - exact[i]) / draws as f64).sqrt().max(1e-12);
                assert!((f - exact[i]).abs() <= 4.0 * se, "{v:?} expert {i}: {f} vs {}", exact[i]);
                assert!((quad[i] - exact[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn concentration_at_large_eta() {
        let s = score(&[1.0, 1.5, 2.0, 4.0]);
        let p = choice_probabilities_subset_sum(&s, 50.0).unwrap();
        assert!(p[0] >= 0.99);
    }

    #[test]
    fn monte_carlo_estimator_is_normalized() {
        let mut rng = substream(9, 0, 9);
        let p = choice_probabilities_monte_carlo(&score(&[0.0, 1.0]), 1.0, 10_000, &mut rng).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn subset_sum_and_quadrature_agree(
                v in prop::collection::vec(0.0f64..20.0, 1..=12),
                eta in 0.05f64..2.0,
            ) {
                let s = score(&v);
                let a = choice_probabilities_subset_sum(&s, eta).unwrap();
                let b = choice_probabilities_quadrature(&s, eta).unwrap();
                prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
                }
            }

            #[test]
            fn lowering_a_score_raises_its_probability(
                v in prop::collection::vec(0.0f64..10.0, 2..=8),
                eta in 0.1f64..2.0,
                which in 0usize..8,
                delta in 0.1f64..3.0,
            ) {
                let which = which % v.len();
                let before = choice_probabilities_subset_sum(&score(&v), eta).unwrap();
                let mut lowered = v.clone();
                lowered[which] -= delta;
                let after = choice_probabilities_subset_sum(&score(&lowered), eta).unwrap();
                prop_assert!(after[which] > before[which]);
                for j in 0..v.len() {
                    if j != which {
                        prop_assert!(after[j] <= before[j] + 1e-12);
                    }
                }
            }

            #[test]
            fn smaller_score_gets_more_weight(
                v in prop::collection::vec(0.0f64..10.0, 2..=8),
                eta in 0.1f64..2.0,
            ) {
                let p = choice_probabilities_subset_sum(&score(&v), eta).unwrap();
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        if v[i] < v[j] - 1e-9 {
                            prop_assert!(p[i] > p[j]);
                        }
                    }
                }
            }

            #[test]
            fn mass_concentrates_on_minimum(
                gap in 0.5f64..5.0,
                rest in prop::collection::vec(0.0f64..5.0, 1..=6),
            ) {
                let mut v = vec![0.0];
                v.extend(rest.iter().map(|r| r + gap));
                let p = choice_probabilities_subset_sum(&score(&v), 50.0).unwrap();
                prop_assert!(p[0] >= 0.99);
            }
        }
    }
}
