//! Acceptance suite: one test per criterion, each printing a `[PASS]` or
//! `[FAIL]` line that survives output capture.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fpl::config::RunOutput;
use fpl::environments::FlKiller;
use fpl::exact::{choice_probabilities_quadrature, choice_probabilities_subset_sum, PenalizedScore};
use fpl::harness::bounds::BoundReport;
use fpl::scenarios::{run_scenario, Overrides};

/// Criteria run one at a time so wall-clock limits are meaningful.
static SERIAL: Mutex<()> = Mutex::new(());

fn report_line(criterion: u32, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] criterion {criterion}: {detail}");
}

/// Runs `body`, prints its line and fails the test on error or overtime.
fn criterion(n: u32, limit: Option<Duration>, body: impl FnOnce() -> Result<String, String>) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let over = limit.is_some_and(|l| elapsed > l);
    let (ok, detail) = match &result {
        Ok(d) if !over => (true, format!("{d} ({:.2}s)", elapsed.as_secs_f64())),
        Ok(d) => (false, format!("{d}; took {:.2}s, limit {:?}", elapsed.as_secs_f64(), limit.unwrap())),
        Err(e) => (false, e.clone()),
    };
    report_line(n, ok, &detail);
    assert!(ok, "criterion {n}: {detail}");
}

fn scenario(name: &str) -> Result<RunOutput, String> {
    run_scenario(name, Overrides::default()).map_err(|e| format!("{name}: {e}"))
}

fn check<'a>(out: &'a RunOutput, id: &str) -> Result<&'a BoundReport, String> {
    out.report
        .checks
        .iter()
        .find(|c| c.theorem == id)
        .ok_or_else(|| format!("no check `{id}` in report"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn observation(out: &RunOutput, key: &str, field: &str) -> Result<f64, String> {
    out.report.observations.get(key).and_then(|v| v[field].as_f64()).ok_or_else(|| format!("missing {key}.{field}"))
}

/// `P[I = 0]` for two experts with penalized scores `a`, `b` at rate `eta`.
fn two_expert_p0(a: f64, b: f64, eta: f64) -> f64 {
    if a <= b {
        1.0 - (-eta * (b - a)).exp() / 2.0
    } else {
        (-eta * (a - b)).exp() / 2.0
    }
}

fn two_expert_loss(cum: [f64; 2], k: [f64; 2], eta: f64, s: [f64; 2]) -> f64 {
    let p = two_expert_p0(cum[0] + k[0] / eta, cum[1] + k[1] / eta, eta);
    p * s[0] + (1.0 - p) * s[1]
}

#[test]
fn criterion_01_exact_choice_probability() {
    criterion(1, Some(Duration::from_secs(5)), || {
        let want = 1.0 - (-1.0f64).exp() / 2.0;
        ensure((want - 0.816060).abs() < 5e-7, || format!("closed form {want}"))?;
        let score = PenalizedScore::new(vec![0.0, 1.0]).map_err(|e| e.to_string())?;
        let subset = choice_probabilities_subset_sum(&score, 1.0).map_err(|e| e.to_string())?;
        let quad = choice_probabilities_quadrature(&score, 1.0).map_err(|e| e.to_string())?;
        ensure((subset[0] - want).abs() < 1e-12, || format!("subset sum {}", subset[0]))?;
        ensure((quad[0] - subset[0]).abs() < 1e-9, || format!("quadrature {}", quad[0]))?;

        // Independent sampler: argmin of s_i - q_i/eta with q ~ Exp(1) by inversion.
        let draws = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hits = 0usize;
        for _ in 0..draws {
            let q0 = -(1.0 - rng.random::<f64>()).ln();
            let q1 = -(1.0 - rng.random::<f64>()).ln();
            if 0.0 - q0 <= 1.0 - q1 {
                hits += 1;
            }
        }
        let mc = hits as f64 / draws as f64;
        let sigma = (want * (1.0 - want) / draws as f64).sqrt();
        ensure((mc - subset[0]).abs() <= 4.0 * sigma, || format!("oracle Monte Carlo {mc}"))?;

        let out = scenario("exact-probability-selftest")?;
        ensure(out.report.passed, || format!("{:?}", out.report.failures()))?;
        Ok(format!(
            "P[I=1] = {:.6} (subset sum), |quad - subset| = {:.1e}, oracle MC {mc:.6} within 4 sigma",
            subset[0],
            (quad[0] - subset[0]).abs()
        ))
    });
}

#[test]
fn criterion_02_expected_maximum_of_exponentials() {
    criterion(2, Some(Duration::from_secs(10)), || {
        let lo = 0.57721 + 10f64.ln();
        let hi = 1.0 + 10f64.ln();
        ensure((lo - 2.8797).abs() < 1e-4 && (hi - 3.3026).abs() < 1e-4, || format!("band [{lo}, {hi}]"))?;
        let out = scenario("shifted-max-expectation")?;
        let lower = check(&out, "shifted-max-lower")?;
        let upper = check(&out, "shifted-max-upper")?;
        ensure(lower.passed() && upper.passed(), || format!("{lower:?} {upper:?}"))?;
        let mean = lower.lhs;
        let se = lower.lhs_stderr;
        ensure(mean >= lo - 3.0 * se && mean <= hi + 3.0 * se, || format!("mean {mean} se {se}"))?;
        // The exact value is the harmonic number H_10 = 2.928968...
        let h10: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
        ensure((mean - h10).abs() <= 4.0 * se, || format!("mean {mean} vs H_10 {h10}"))?;
        Ok(format!("E[max q] = {mean:.5} +- {se:.5} in [2.8797, 3.3026]"))
    });
}

#[test]
fn criterion_03_dynamic_rate_on_alternating_losses() {
    criterion(3, Some(Duration::from_secs(60)), || {
        let bound = 2.0 * (2.0 * 1e4 * 2f64.ln()).sqrt();
        ensure((bound - 235.5).abs() < 0.05, || format!("bound {bound}"))?;
        let out = scenario("fl-killer-dynamic-rate")?;
        let c = check(&out, "dynamic-kt")?;
        ensure(c.passed() && c.replicas == 200, || format!("{c:?}"))?;
        let mean = observation(&out, "regret", "mean")?;
        let se = observation(&out, "regret", "stderr")?;
        ensure(mean <= bound + 3.0 * se, || format!("mean regret {mean} > {bound} + 3 * {se}"))?;
        Ok(format!("mean regret {mean:.2} +- {se:.2} <= {bound:.2}"))
    });
}

#[test]
fn criterion_04_follow_the_leader_fails() {
    criterion(4, Some(Duration::from_secs(1)), || {
        // Oracle: replay FL with lowest-index ties directly.
        let (mut a, mut b, mut fl) = (0.0f64, 0.0f64, 0.0);
        for t in 1..=1000 {
            let [x, y] = FlKiller::losses_at(t);
            fl += if a <= b { x } else { y };
            a += x;
            b += y;
        }
        let oracle_regret = fl - a.min(b);
        let out = scenario("fl-failure")?;
        let regret = observation(&out, "regret", "mean")?;
        ensure(regret == oracle_regret, || format!("regret {regret}, oracle {oracle_regret}"))?;
        ensure(regret >= 400.0 && out.report.passed, || format!("regret {regret}"))?;
        Ok(format!("FL loss {fl}, regret {regret} >= 400"))
    });
}

#[test]
fn criterion_05_fpl_against_infeasible_leader() {
    criterion(5, Some(Duration::from_secs(10)), || {
        let out = scenario("fpl-vs-ifpl-exact")?;
        let c = check(&out, "fpl-vs-ifpl")?;
        ensure(c.passed() && c.replicas == 100, || format!("{c:?}"))?;
        // Oracle on two-expert instances with the closed-form probabilities.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let prev = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
            let s = [rng.random::<f64>(), rng.random::<f64>()];
            let k = [2f64.ln(); 2];
            for eta in [0.1, 0.5, 1.0] {
                let ell = two_expert_loss(prev, k, eta, s);
                let r = two_expert_loss([prev[0] + s[0], prev[1] + s[1]], k, eta, s);
                worst = worst.min(eta.exp() * r - ell).min((1.0 + eta + eta * eta) * r - ell);
            }
        }
        ensure(worst >= -1e-9, || format!("oracle slack {worst}"))?;
        Ok(format!("worst slack {:.3e} (library), {worst:.3e} (two-expert oracle)", c.slack))
    });
}

/// Random two-expert games with decreasing rates, losses from the closed form.
fn two_expert_games(seed: u64, uniform: bool) -> Vec<(f64, f64, [f64; 2], [f64; 2], f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200)
        .map(|_| {
            let k = if uniform {
                [2f64.ln(); 2]
            } else {
                [2f64.ln() + rng.random_range(0.0..2.0), 2f64.ln() + rng.random_range(0.0..2.0)]
            };
            let horizon = rng.random_range(1..=8);
            let mut eta = rng.random_range(0.05..2.0);
            let (mut cum, mut ell, mut r) = ([0.0; 2], 0.0, 0.0);
            for _ in 0..horizon {
                eta *= rng.random_range(0.5..=1.0);
                let s = [rng.random::<f64>(), rng.random::<f64>()];
                ell += two_expert_loss(cum, k, eta, s);
                cum = [cum[0] + s[0], cum[1] + s[1]];
                r += two_expert_loss(cum, k, eta, s);
            }
            (ell, r, cum, k, eta)
        })
        .collect()
}

#[test]
fn criterion_06_infeasible_leader_against_best_expert() {
    criterion(6, None, || {
        let out = scenario("ifpl-vs-beh-exact")?;
        let c = check(&out, "ifpl-vs-beh")?;
        ensure(c.passed(), || format!("{c:?}"))?;
        let worst = two_expert_games(6, false)
            .into_iter()
            .flat_map(|(_, r, s, k, eta)| (0..2).map(move |i| s[i] + k[i] / eta - r))
            .fold(f64::INFINITY, f64::min);
        ensure(worst >= -1e-9, || format!("oracle slack {worst}"))?;
        Ok(format!("worst slack {:.3e} over {} instances; oracle {worst:.3e}", c.slack, c.replicas))
    });
}

#[test]
fn criterion_07_lower_bound() {
    criterion(7, None, || {
        let out = scenario("lower-bound-exact")?;
        let c = check(&out, "lower-bound")?;
        ensure(c.passed(), || format!("{c:?}"))?;
        let worst = two_expert_games(7, true)
            .into_iter()
            .map(|(ell, _, s, _, eta)| ell - (s[0].min(s[1]) - 2f64.ln() / eta))
            .fold(f64::INFINITY, f64::min);
        ensure(worst >= -1e-9, || format!("oracle slack {worst}"))?;
        Ok(format!("worst slack {:.3e} over {} instances; oracle {worst:.3e}", c.slack, c.replicas))
    });
}

#[test]
fn criterion_08_self_confident_rate() {
    criterion(8, Some(Duration::from_secs(300)), || {
        let out = scenario("self-confident-bernoulli")?;
        let c = check(&out, "self-confident-k")?;
        ensure(c.passed() && c.exact && c.replicas == 50, || format!("{c:?}"))?;
        ensure(c.slack >= -1e-9, || format!("slack {}", c.slack))?;
        ensure((c.rhs - c.lhs - c.slack).abs() < 1e-9, || format!("{c:?}"))?;
        Ok(format!(
            "every replica within bound; tightest: l = {:.2}, rhs = {:.2}, slack {:.2}",
            c.lhs, c.rhs, c.slack
        ))
    });
}

#[test]
fn criterion_09_hierarchy_bound() {
    criterion(9, Some(Duration::from_secs(600)), || {
        let out = scenario("hierarchy-countable")?;
        let c = check(&out, "hierarchy-chain")?;
        let per = c.per_expert.as_ref().ok_or("no per-expert list")?;
        ensure(per.len() == 100, || format!("{} experts reported", per.len()))?;
        ensure(c.passed() && per.iter().all(|e| e.verdict.passed()), || format!("{c:?}"))?;
        let worst = per.iter().min_by(|a, b| a.slack.total_cmp(&b.slack)).unwrap();
        // Undo the chained bound at the tightest expert and compare the implied
        // mean loss s_i with its Bernoulli mean p_i T.
        let k = 0.5 + 2.0 * ((worst.expert + 1) as f64).ln();
        let extra = 100.0 * (2.0 * (2.0 * (k + 1.0)).sqrt() + 0.5 + 2.0 * (k + 1.0).ln() + 2.0);
        let p = if worst.expert == 19 { 0.3 } else { 0.5 };
        let s_mean = worst.rhs - extra;
        ensure((s_mean - p * 1e4).abs() < 200.0, || format!("implied s = {s_mean}"))?;
        Ok(format!(
            "all 100 experts pass; tightest expert {} slack {:.1} +- {:.1}",
            worst.expert, worst.slack, worst.slack_stderr
        ))
    });
}

#[test]
fn criterion_10_high_probability_coverage() {
    criterion(10, None, || {
        let out = scenario("high-probability-coverage")?;
        let ch = check(&out, "chernoff-hoeffding-coverage")?;
        let mk = check(&out, "markov-coverage")?;
        let threshold = 2.0 * (-3.0f64).exp();
        ensure((threshold - 0.0996).abs() < 1e-4 && (ch.rhs - threshold).abs() < 1e-15, || {
            format!("threshold {}", ch.rhs)
        })?;
        ensure(mk.rhs == 0.5, || format!("markov threshold {}", mk.rhs))?;
        let ell = out.report.observations["expected_loss_shared_sequence"].as_f64().unwrap_or(0.0);
        ensure(ell >= 9.0, || format!("l = {ell}"))?;
        let band = 3.0 * (threshold * (1.0 - threshold) / 1e4).sqrt();
        ensure(ch.lhs <= threshold + band && ch.replicas == 10_000, || format!("{ch:?}"))?;
        ensure(mk.lhs <= 0.5 + 3.0 * (0.25f64 / 1e4).sqrt(), || format!("{mk:?}"))?;
        ensure(out.report.passed, || format!("{:?}", out.report.failures()))?;
        Ok(format!(
            "l = {ell:.1}; deviation frequency {:.4} <= 0.0996; Markov frequency {:.4} <= 0.5",
            ch.lhs, mk.lhs
        ))
    });
}

#[test]
fn criterion_11_adaptive_adversary() {
    criterion(11, None, || {
        let bound = 2.0 * (2.0 * 5e3 * 2f64.ln()).sqrt();
        ensure((bound - 166.5).abs() < 0.05, || format!("bound {bound}"))?;
        let out = scenario("adaptive-adversary")?;
        let c = check(&out, "dynamic-kt")?;
        ensure(c.passed() && c.replicas == 200, || format!("{c:?}"))?;
        let mean = observation(&out, "regret", "mean")?;
        let se = observation(&out, "regret", "stderr")?;
        ensure(mean <= bound + 3.0 * se, || format!("mean regret {mean}"))?;
        let once = observation(&out, "initial_once_regret", "mean")?;
        Ok(format!(
            "mean regret {mean:.2} +- {se:.2} <= {bound:.2}; initial-once regret {once:.1} (recorded only)"
        ))
    });
}

#[test]
fn criterion_12_structural_identities() {
    criterion(12, None, || {
        let out = scenario("structural-identities")?;
        ensure(out.report.checks.len() == 4, || format!("{} suites", out.report.checks.len()))?;
        for c in &out.report.checks {
            ensure(c.passed() && c.replicas == 1000, || format!("{c:?}"))?;
        }
        let worst = out.report.checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
        Ok(format!("4 suites x 1000 instances, worst slack {worst:.2e}"))
    });
}
