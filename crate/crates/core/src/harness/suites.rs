//! Exact checks over many small random instances.
//!
//! Each suite draws its instances from a seeded generator and computes every
//! expected loss from exact choice probabilities, so a failure is a bug and
//! never sampling noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bounds::{BoundReport, Direction, EXACT_SLACK};
use crate::error::Result;
use crate::exact::{choice_probabilities, PenalizedScore};
use crate::experts::argmin_by;

/// Worst case over many `(lhs, rhs)` comparisons.
#[derive(Debug, Clone)]
struct Tally {
    direction: Direction,
    tolerance: f64,
    checks: usize,
    failures: usize,
    worst: Option<(f64, f64, f64)>,
}

impl Tally {
    fn new(direction: Direction, tolerance: f64) -> Self {
        Self {
            direction,
            tolerance,
            checks: 0,
            failures: 0,
            worst: None,
        }
    }

    fn push(&mut self, lhs: f64, rhs: f64) {
        let slack = match self.direction {
            Direction::Upper => rhs - lhs,
            Direction::Lower => lhs - rhs,
        };
        self.push_slack(lhs, rhs, slack);
    }

    /// Two-sided: `lhs == rhs` up to the tolerance.
    fn push_equal(&mut self, lhs: f64, rhs: f64) {
        self.push_slack(lhs, rhs, -(lhs - rhs).abs());
    }

    fn push_slack(&mut self, lhs: f64, rhs: f64, slack: f64) {
        self.checks += 1;
        if !(slack >= -self.tolerance) {
            self.failures += 1;
        }
        if self.worst.is_none_or(|(_, _, w)| slack < w) {
            self.worst = Some((lhs, rhs, slack));
        }
    }

    fn report(self, id: &str, claim: &str, instances: usize) -> BoundReport {
        let (lhs, rhs, slack) = self.worst.unwrap_or((0.0, 0.0, 0.0));
        let mut r = BoundReport::deterministic(id, claim, self.direction, lhs, rhs, self.tolerance);
        r.slack = slack;
        r.verdict = super::Verdict::from_bool(self.failures == 0 && self.checks > 0);
        r.replicas = instances;
        r.with_note(format!(
            "{} comparisons over {} instances, {} beyond tolerance {:e}; lhs/rhs/slack are from the tightest comparison",
            self.checks, instances, self.failures, self.tolerance
        ))
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

/// Complexities with `sum e^{-k} <= 1`: `ln n` plus a random nonnegative excess.
fn random_complexities(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let base = (n as f64).ln();
    (0..n).map(|_| base + rng.random_range(0.0..2.0)).collect()
}

/// `eta_1 >= eta_2 >= ...`, starting in `[0.05, 2]`.
fn decreasing_rates(rng: &mut ChaCha8Rng, horizon: usize) -> Vec<f64> {
    let mut eta = rng.random_range(0.05..=2.0);
    (0..horizon)
        .map(|_| {
            let e = eta;
            eta *= rng.random_range(0.5..=1.0);
            e
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `P[I = i]` for FPL on cumulative losses `cum` at rate `eta`.
fn fpl_weights(cum: &[f64], k: &[f64], eta: f64) -> Result<Vec<f64>> {
    let score = PenalizedScore::from_losses(cum, k, eta, |_| true)?;
    choice_probabilities(&score, eta)
}

/// Expected loss of FPL and of the infeasible leader in one round.
fn round_losses(prev: &[f64], current: &[f64], k: &[f64], eta: f64) -> Result<(f64, f64)> {
    let through: Vec<f64> = prev.iter().zip(current).map(|(a, b)| a + b).collect();
    let ell = dot(&fpl_weights(prev, k, eta)?, current);
    let r = dot(&fpl_weights(&through, k, eta)?, current);
    Ok((ell, r))
}

/// One-round comparison of FPL and the infeasible leader:
/// `l_t <= e^eta r_t`, and `l_t <= (1 + eta + eta^2) r_t` when `eta <= 1`.
pub fn fpl_vs_ifpl_suite(instances: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(Direction::Upper, EXACT_SLACK);
    for _ in 0..instances {
        let n = rng.random_range(1..=6);
        let k = random_complexities(&mut rng, n);
        let prev = uniform_vec(&mut rng, n, 0.0, 10.0);
        let current = uniform_vec(&mut rng, n, 0.0, 1.0);
        for eta in [0.1, 0.5, 1.0] {
            let (ell, r) = round_losses(&prev, &current, &k, eta)?;
            tally.push(ell, eta.exp() * r);
            if eta <= 1.0 {
                tally.push(ell, (1.0 + eta + eta * eta) * r);
            }
        }
    }
    Ok(tally.report(
        "fpl-vs-ifpl",
        "l_t <= e^eta r_t, and l_t <= (1 + eta + eta^2) r_t for eta <= 1",
        instances,
    ))
}

/// A random game with exact cumulative losses of FPL and the infeasible leader.
struct SmallGame {
    n: usize,
    k: Vec<f64>,
    eta: Vec<f64>,
    expert_losses: Vec<f64>,
    fpl: f64,
    ifpl: f64,
}

fn small_game(rng: &mut ChaCha8Rng, uniform: bool) -> Result<SmallGame> {
    let n = rng.random_range(1..=6);
    let horizon = rng.random_range(1..=8);
    let k = if uniform {
        vec![(n as f64).ln(); n]
    } else {
        random_complexities(rng, n)
    };
    let eta = decreasing_rates(rng, horizon);
    let mut cum = vec![0.0; n];
    let (mut fpl, mut ifpl) = (0.0, 0.0);
    for &e in &eta {
        let s = uniform_vec(rng, n, 0.0, 1.0);
        let (ell, r) = round_losses(&cum, &s, &k, e)?;
        fpl += ell;
        ifpl += r;
        for (c, x) in cum.iter_mut().zip(&s) {
            *c += x;
        }
    }
    Ok(SmallGame {
        n,
        k,
        eta,
        expert_losses: cum,
        fpl,
        ifpl,
    })
}

/// `r_{1:T} <= s_{1:T}^i + k^i/eta_T` for every expert, with decreasing rates.
pub fn ifpl_vs_beh_suite(instances: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(Direction::Upper, EXACT_SLACK);
    for _ in 0..instances {
        let g = small_game(&mut rng, false)?;
        let eta_t = *g.eta.last().expect("horizon >= 1");
        for i in 0..g.n {
            tally.push(g.ifpl, g.expert_losses[i] + g.k[i] / eta_t);
        }
    }
    Ok(tally.report("ifpl-vs-beh", "r_{1:T} <= s_{1:T}^i + k^i/eta_T for all i", instances))
}

/// `l_{1:T} >= s_{1:T}^min - ln n / eta_T` for uniform complexities.
pub fn lower_bound_suite(instances: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(Direction::Lower, EXACT_SLACK);
    for _ in 0..instances {
        let g = small_game(&mut rng, true)?;
        let eta_t = *g.eta.last().expect("horizon >= 1");
        let s_min = g.expert_losses.iter().copied().fold(f64::INFINITY, f64::min);
        tally.push(g.fpl, s_min - (g.n as f64).ln() / eta_t);
    }
    Ok(tally.report("lower-bound", "uniform k: l_{1:T} >= s_min - ln(n)/eta_T", instances))
}

/// Unit vector of the lowest-index minimizer.
fn leader(s: &[f64]) -> Vec<f64> {
    let i = argmin_by(0..s.len(), |i| s[i]).expect("non-empty");
    let mut d = vec![0.0; s.len()];
    d[i] = 1.0;
    d
}

/// Losses `s_1..s_T` with entries in `[-5, 5]`, and their prefix sums
/// `s_{1:0} = 0, s_{1:1}, ..., s_{1:T}`.
fn random_states(rng: &mut ChaCha8Rng, n: usize, horizon: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let steps: Vec<Vec<f64>> = (0..horizon).map(|_| uniform_vec(rng, n, -5.0, 5.0)).collect();
    let mut prefix = vec![vec![0.0; n]];
    for s in &steps {
        let last = prefix.last().expect("non-empty");
        prefix.push(last.iter().zip(s).map(|(a, b)| a + b).collect());
    }
    (steps, prefix)
}

/// `sum_t d(s_{<t}) . s_t` equals
/// `d(s_{1:T}) . s_{1:T} + sum_t [d(s_{<t}) - d(s_{1:t})] . s_{<t} + sum_t [d(s_{<t}) - d(s_{1:t})] . s_t`
/// for the leader rule and for FPL's choice probabilities.
pub fn motivation_identity_suite(instances: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let claim = "sum_t d(s_<t).s_t = d(s_1:T).s_1:T + sum_t [d(s_<t) - d(s_1:t)].(s_<t + s_t)";
    let mut leader_tally = Tally::new(Direction::Upper, EXACT_SLACK);
    let mut weight_tally = Tally::new(Direction::Upper, EXACT_SLACK);
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let horizon = rng.random_range(1..=8);
        let (steps, prefix) = random_states(&mut rng, n, horizon);
        let k = random_complexities(&mut rng, n);
        let eta = rng.random_range(0.1..=2.0);
        let fpl = |s: &[f64]| fpl_weights(s, &k, eta);
        for rule in 0..2 {
            let d = |s: &[f64]| -> Result<Vec<f64>> { if rule == 0 { Ok(leader(s)) } else { fpl(s) } };
            let mut lhs = 0.0;
            let mut rhs = dot(&d(&prefix[horizon])?, &prefix[horizon]);
            for t in 0..horizon {
                let before = d(&prefix[t])?;
                let after = d(&prefix[t + 1])?;
                lhs += dot(&before, &steps[t]);
                let diff: Vec<f64> = before.iter().zip(&after).map(|(a, b)| a - b).collect();
                rhs += dot(&diff, &prefix[t]) + dot(&diff, &steps[t]);
            }
            let tally = if rule == 0 { &mut leader_tally } else { &mut weight_tally };
            tally.push_equal(lhs, rhs);
        }
    }
    Ok(vec![
        leader_tally.report("motivation-identity-leader", claim, instances),
        weight_tally.report("motivation-identity-fpl-weights", claim, instances),
    ])
}

/// `sum_t M(s_{1:t}) . s_t <= min_i s_{1:T}^i` for arbitrary real losses.
pub fn zero_regret_suite(instances: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(Direction::Upper, EXACT_SLACK);
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let horizon = rng.random_range(1..=8);
        let (steps, prefix) = random_states(&mut rng, n, horizon);
        let lhs: f64 = (0..horizon).map(|t| dot(&leader(&prefix[t + 1]), &steps[t])).sum();
        let best = prefix[horizon].iter().copied().fold(f64::INFINITY, f64::min);
        tally.push(lhs, best);
    }
    Ok(tally.report(
        "infeasible-leader-zero-regret",
        "sum_t M(s_1:t).s_t <= min_i s_1:T^i",
        instances,
    ))
}

/// `sum_t M(s_{<t}) . s_t >= min_i s_{1:T}^i` for arbitrary real losses.
pub fn nonnegative_regret_suite(instances: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(Direction::Lower, EXACT_SLACK);
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let horizon = rng.random_range(1..=8);
        let (steps, prefix) = random_states(&mut rng, n, horizon);
        let lhs: f64 = (0..horizon).map(|t| dot(&leader(&prefix[t]), &steps[t])).sum();
        let best = prefix[horizon].iter().copied().fold(f64::INFINITY, f64::min);
        tally.push(lhs, best);
    }
    Ok(tally.report(
        "leader-nonnegative-regret",
        "sum_t M(s_<t).s_t >= min_i s_1:T^i",
        instances,
    ))
}

/// All structural suites with `instances` each.
pub fn structural_identities(instances: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let mut out = motivation_identity_suite(instances, seed)?;
    out.push(zero_regret_suite(instances, seed.wrapping_add(1))?);
    out.push(nonnegative_regret_suite(instances, seed.wrapping_add(2))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        assert!(fpl_vs_ifpl_suite(30, 1).unwrap().passed());
        assert!(ifpl_vs_beh_suite(30, 2).unwrap().passed());
        assert!(lower_bound_suite(30, 3).unwrap().passed());
        for r in structural_identities(50, 4).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn tally_detects_violations() {
        let mut t = Tally::new(Direction::Upper, 1e-9);
        t.push(1.0, 2.0);
        t.push(2.0, 1.0);
        let r = t.report("x", "", 2);
        assert!(!r.passed());
        assert_eq!(r.slack, -1.0);
        let mut t = Tally::new(Direction::Upper, 1e-9);
        t.push_equal(1.0, 1.0 + 1e-12);
        assert!(t.report("x", "", 1).passed());
    }

    #[test]
    fn nonnegative_regret_is_not_vacuous() {
        // The leader rule applied to the future does beat it, so the two
        // inequalities point in opposite directions on the same data.
        let steps = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let prefix = [vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let feasible: f64 = (0..2).map(|t| dot(&leader(&prefix[t]), &steps[t])).sum();
        let infeasible: f64 = (0..2).map(|t| dot(&leader(&prefix[t + 1]), &steps[t])).sum();
        assert_eq!(feasible, 2.0);
        assert_eq!(infeasible, 0.0);
    }
}
