//! Regret bounds as evaluable right-hand sides, with hypothesis checks and
//! verdicts.
//!
//! In exact mode every replica must satisfy its bound up to [`EXACT_SLACK`].
//! Otherwise the realized loss estimates the expected loss and the bound
//! passes when the mean margin is at least `-3` standard errors.

use serde::{Deserialize, Serialize};

use super::setup::GameSetup;
use super::stats::mean_stderr;
use super::{GameSummary, PlayMode};
use crate::error::{FplError, Result};
use crate::experts::{argmin_by, ExpertPool};
use crate::predictors::{HierarchyMode, PredictorKind};
use crate::schedules::{LossSource, Schedule};

/// Absolute tolerance of exact-mode checks.
pub const EXACT_SLACK: f64 = 1e-9;
/// Standard errors allowed below zero in Monte Carlo checks.
pub const MC_SIGMAS: f64 = 3.0;
/// Tolerance on `k_i <= K`.
pub const COMPLEXITY_SLACK: f64 = 1e-12;

/// `s + sqrt(L) (k + 1)`.
pub fn static_unit_rhs(s: f64, k: f64, l: f64) -> f64 {
    s + l.sqrt() * (k + 1.0)
}

/// `s + 2 sqrt(L K)`.
pub fn static_k_rhs(s: f64, big_k: f64, l: f64) -> f64 {
    s + 2.0 * (l * big_k).sqrt()
}

/// `s + 2 sqrt(L k) + 3k`.
pub fn static_ratio_rhs(s: f64, k: f64, l: f64) -> f64 {
    s + 2.0 * (l * k).sqrt() + 3.0 * k
}

/// `s + sqrt(T) (k + 2)`.
pub fn dynamic_t_rhs(s: f64, k: f64, horizon: f64) -> f64 {
    s + horizon.sqrt() * (k + 2.0)
}

/// `s + 2 sqrt(2 T K)`.
pub fn dynamic_kt_rhs(s: f64, big_k: f64, horizon: f64) -> f64 {
    s + 2.0 * (2.0 * horizon * big_k).sqrt()
}

/// `s + (k + 1) sqrt(2 (s + 1)) + 2 (k + 1)^2`.
pub fn self_confident_rhs(s: f64, k: f64) -> f64 {
    s + (k + 1.0) * (2.0 * (s + 1.0)).sqrt() + 2.0 * (k + 1.0).powi(2)
}

/// `s + 2 sqrt(2 (s + 1) K) + 8K`.
pub fn self_confident_k_rhs(s: f64, big_k: f64) -> f64 {
    s + 2.0 * (2.0 * (s + 1.0) * big_k).sqrt() + 8.0 * big_k
}

/// `s + (k + 2) sqrt(2s) + 2 (k + 2)^2`.
pub fn adaptive_min_penalized_rhs(s: f64, k: f64) -> f64 {
    s + (k + 2.0) * (2.0 * s).sqrt() + 2.0 * (k + 2.0).powi(2)
}

/// `s + 2 sqrt(2 K s) + 5 K ln s + 3K + 6`, with the logarithm taken at 1 when `s < 1`.
pub fn adaptive_smin_k_rhs(s: f64, big_k: f64) -> f64 {
    s + 2.0 * (2.0 * big_k * s).sqrt() + 5.0 * big_k * s.max(1.0).ln() + 3.0 * big_k + 6.0
}

/// `s_min - ln n / eta_T`, a lower bound for uniform complexities.
pub fn lower_bound_rhs(s_min: f64, n: usize, eta_final: f64) -> f64 {
    s_min - (n as f64).ln() / eta_final
}

/// `s + k / eta_T`, bounding the infeasible leader's loss.
pub fn ifpl_vs_beh_rhs(s: f64, k: f64, eta_final: f64) -> f64 {
    s + k / eta_final
}

/// `s + sqrt(T) [2 sqrt(2 (k + 1)) + 1/2 + 2 ln(k + 1) + 2]`.
pub fn hierarchy_chain_rhs(s: f64, k: f64, horizon: f64) -> f64 {
    s + horizon.sqrt() * (2.0 * (2.0 * (k + 1.0)).sqrt() + 0.5 + 2.0 * (k + 1.0).ln() + 2.0)
}

/// The bounds the harness can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    StaticUnit,
    StaticK,
    StaticRatio,
    DynamicT,
    DynamicKt,
    SelfConfident,
    SelfConfidentK,
    AdaptiveMinPenalized,
    AdaptiveSminK,
    LowerBound,
    IfplVsBeh,
    FplVsIfpl,
    HierarchyChain,
}

impl BoundKind {
    pub const ALL: [BoundKind; 13] = [
        BoundKind::StaticUnit,
        BoundKind::StaticK,
        BoundKind::StaticRatio,
        BoundKind::DynamicT,
        BoundKind::DynamicKt,
        BoundKind::SelfConfident,
        BoundKind::SelfConfidentK,
        BoundKind::AdaptiveMinPenalized,
        BoundKind::AdaptiveSminK,
        BoundKind::LowerBound,
        BoundKind::IfplVsBeh,
        BoundKind::FplVsIfpl,
        BoundKind::HierarchyChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::StaticUnit => "static-unit",
            BoundKind::StaticK => "static-k",
            BoundKind::StaticRatio => "static-ratio",
            BoundKind::DynamicT => "dynamic-t",
            BoundKind::DynamicKt => "dynamic-kt",
            BoundKind::SelfConfident => "self-confident",
            BoundKind::SelfConfidentK => "self-confident-k",
            BoundKind::AdaptiveMinPenalized => "adaptive-min-penalized",
            BoundKind::AdaptiveSminK => "adaptive-smin-k",
            BoundKind::LowerBound => "lower-bound",
            BoundKind::IfplVsBeh => "ifpl-vs-beh",
            BoundKind::FplVsIfpl => "fpl-vs-ifpl",
            BoundKind::HierarchyChain => "hierarchy-chain",
        }
    }

    /// The inequality being checked.
    pub fn claim(self) -> &'static str {
        match self {
            BoundKind::StaticUnit => "eta = 1/sqrt(L), L >= l: l <= s_i + sqrt(L)(k_i + 1) for all i",
            BoundKind::StaticK => "eta = sqrt(K/L), L >= l, k_i <= K: l <= s_i + 2 sqrt(LK) for all i",
            BoundKind::StaticRatio => "eta = sqrt(k_i/L), L >= max(s_i, k_i): l <= s_i + 2 sqrt(L k_i) + 3 k_i",
            BoundKind::DynamicT => "eta_t = 1/sqrt(t): l <= s_i + sqrt(T)(k_i + 2) for all i",
            BoundKind::DynamicKt => "eta_t = sqrt(K/2t), k_i <= K: l <= s_i + 2 sqrt(2TK) for all i",
            BoundKind::SelfConfident => {
                "eta_t = 1/sqrt(2(l_<t + 1)): l <= s_i + (k_i + 1) sqrt(2(s_i + 1)) + 2(k_i + 1)^2 for all i"
            }
            BoundKind::SelfConfidentK => {
                "eta_t = sqrt(K/2(l_<t + 1)), k_i <= K: l <= s_i + 2 sqrt(2(s_i + 1)K) + 8K for all i"
            }
            BoundKind::AdaptiveMinPenalized => {
                "eta_t = 1/min_i(k_i + sqrt(k_i^2 + 2 s_<t,i + 2)): l <= s_i + (k_i + 2) sqrt(2 s_i) + 2(k_i + 2)^2 for all i"
            }
            BoundKind::AdaptiveSminK => {
                "eta_t = sqrt(1/2) min(1, sqrt(K/s_min,<t)), k_i <= K: l <= s_i + 2 sqrt(2K s_i) + 5K ln(s_i) + 3K + 6 for all i"
            }
            BoundKind::LowerBound => "uniform k: l >= s_min - ln(n)/eta_T",
            BoundKind::IfplVsBeh => "r <= s_i + k_i/eta_T for all i",
            BoundKind::FplVsIfpl => "l_t <= e^eta_t r_t, and l_t <= (1 + eta_t + eta_t^2) r_t when eta_t <= 1",
            BoundKind::HierarchyChain => {
                "hierarchical FPL: l <= s_i + sqrt(T)[2 sqrt(2(k_i + 1)) + 1/2 + 2 ln(k_i + 1) + 2] for all i"
            }
        }
    }

    pub fn is_lower(self) -> bool {
        self == BoundKind::LowerBound
    }

    /// The schedule kind an upper bound is stated for.
    fn schedule_name(self) -> Option<&'static str> {
        match self {
            BoundKind::StaticUnit => Some("static-l"),
            BoundKind::StaticK => Some("static-kl"),
            BoundKind::StaticRatio => Some("static-ratio"),
            BoundKind::DynamicT => Some("dynamic-t"),
            BoundKind::DynamicKt => Some("dynamic-kt"),
            BoundKind::SelfConfident => Some("self-confident"),
            BoundKind::SelfConfidentK => Some("self-confident-k"),
            BoundKind::AdaptiveMinPenalized => Some("adaptive-min-penalized"),
            BoundKind::AdaptiveSminK => Some("adaptive-smin-k"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `lhs <= rhs`.
    Upper,
    /// `lhs >= rhs`.
    Lower,
}

/// Margin of one expert's bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSlack {
    pub expert: usize,
    pub rhs: f64,
    pub slack: f64,
    pub slack_stderr: f64,
    pub verdict: Verdict,
}

/// Outcome of one check. `slack` is signed so that negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Identifier of the checked result.
    pub theorem: String,
    pub claim: String,
    pub direction: Direction,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub slack: f64,
    pub slack_stderr: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert: Option<usize>,
    pub replicas: usize,
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_expert: Option<Vec<ExpertSlack>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    /// A deterministic check of `lhs <= rhs` (or `>=`) up to `tolerance`.
    pub fn deterministic(
        id: impl Into<String>,
        claim: impl Into<String>,
        direction: Direction,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> Self {
        let slack = match direction {
            Direction::Upper => rhs - lhs,
            Direction::Lower => lhs - rhs,
        };
        Self {
            theorem: id.into(),
            claim: claim.into(),
            direction,
            lhs,
            lhs_stderr: 0.0,
            rhs,
            slack,
            slack_stderr: 0.0,
            verdict: Verdict::from_bool(slack >= -tolerance),
            expert: None,
            replicas: 1,
            exact: true,
            per_expert: None,
            note: None,
        }
    }

    /// A Monte Carlo check: `lhs` is a mean with standard error `lhs_stderr`
    /// and passes when `lhs <= rhs + sigmas * lhs_stderr` (or the mirror image).
    pub fn statistical(
        id: impl Into<String>,
        claim: impl Into<String>,
        direction: Direction,
        lhs: f64,
        lhs_stderr: f64,
        rhs: f64,
        sigmas: f64,
        replicas: usize,
    ) -> Self {
        let slack = match direction {
            Direction::Upper => rhs - lhs,
            Direction::Lower => lhs - rhs,
        };
        Self {
            theorem: id.into(),
            claim: claim.into(),
            direction,
            lhs,
            lhs_stderr,
            rhs,
            slack,
            slack_stderr: lhs_stderr,
            verdict: Verdict::from_bool(slack >= -sigmas * lhs_stderr - EXACT_SLACK),
            expert: None,
            replicas,
            exact: false,
            per_expert: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

fn hypothesis(kind: BoundKind, reason: impl Into<String>) -> FplError {
    FplError::Hypothesis {
        bound: kind.name().to_string(),
        reason: reason.into(),
    }
}

/// Whether losses in this setup are exact expectations.
pub fn is_exact(setup: &GameSetup) -> bool {
    setup.mode == PlayMode::ExactExpected || setup.predictor.kind == PredictorKind::DeterministicWeights
}

/// Rejects configurations the bound is not stated for. A mismatch is a
/// configuration error, never a failed bound.
pub fn check_hypotheses(kind: BoundKind, setup: &GameSetup) -> Result<()> {
    let pool = setup.pool.build()?;
    let predictor = setup.predictor.kind;
    if pool.has_entering_times() {
        return Err(hypothesis(kind, "bounds are stated for experts present from round 1"));
    }
    if kind == BoundKind::HierarchyChain {
        if predictor != PredictorKind::HierarchicalFpl {
            return Err(hypothesis(kind, "needs predictor `hierarchical-fpl`"));
        }
        if setup.predictor.hierarchy != HierarchyMode::Dynamic {
            return Err(hypothesis(kind, "needs hierarchy = \"dynamic\""));
        }
        return Ok(());
    }
    if !matches!(
        predictor,
        PredictorKind::Fpl | PredictorKind::Ifpl | PredictorKind::DeterministicWeights
    ) {
        return Err(hypothesis(
            kind,
            format!("predictor `{}` is not FPL with a schedule", predictor.name()),
        ));
    }
    let schedule = setup
        .resolved_schedule()
        .ok_or_else(|| hypothesis(kind, "no schedule configured"))?;

    match kind {
        BoundKind::LowerBound => {
            if pool.uniform_complexity().is_none() {
                return Err(hypothesis(kind, "needs equal complexities for all experts"));
            }
        }
        BoundKind::IfplVsBeh | BoundKind::FplVsIfpl => {
            if predictor != PredictorKind::Ifpl {
                return Err(hypothesis(kind, "needs predictor `ifpl` to compute the infeasible leader's loss"));
            }
            if setup.mode != PlayMode::ExactExpected {
                return Err(hypothesis(kind, "needs mode = \"exact-expected\""));
            }
        }
        _ => {
            let wanted = kind.schedule_name().expect("upper bounds name their schedule");
            if schedule.name() != wanted {
                return Err(hypothesis(
                    kind,
                    format!("stated for schedule `{wanted}`, configured `{}`", schedule.name()),
                ));
            }
            if let Some(big_k) = schedule.k_bound() {
                let k_max = pool.max_complexity();
                if k_max > big_k + COMPLEXITY_SLACK {
                    return Err(hypothesis(kind, format!("needs k_i <= K, but max k_i = {k_max} > K = {big_k}")));
                }
            }
            if let Some(source) = schedule.loss_source() {
                if source != LossSource::Exact && predictor != PredictorKind::DeterministicWeights {
                    return Err(hypothesis(
                        kind,
                        "self-confident bounds are stated for rates fed by the exact expected loss",
                    ));
                }
            }
            if let Schedule::StaticRatio { ratio } = schedule {
                if ratio > 1.0 {
                    return Err(hypothesis(kind, "needs k_i/L <= 1"));
                }
            }
        }
    }
    Ok(())
}

struct Params {
    horizon: f64,
    big_k: Option<f64>,
    l: Option<f64>,
    ratio: Option<f64>,
}

/// Bound for expert `i` in one replica; `None` when the expert does not meet
/// the bound's per-expert hypothesis.
fn expert_rhs(kind: BoundKind, p: &Params, summary: &GameSummary, s: f64, k: f64) -> Option<f64> {
    let eta_t = summary.final_eta;
    Some(match kind {
        BoundKind::StaticUnit => static_unit_rhs(s, k, p.l?),
        BoundKind::StaticK => static_k_rhs(s, p.big_k?, p.l?),
        BoundKind::StaticRatio => {
            let l = k / p.ratio?;
            if k <= 0.0 || l < s.max(k) {
                return None;
            }
            static_ratio_rhs(s, k, l)
        }
        BoundKind::DynamicT => dynamic_t_rhs(s, k, p.horizon),
        BoundKind::DynamicKt => dynamic_kt_rhs(s, p.big_k?, p.horizon),
        BoundKind::SelfConfident => self_confident_rhs(s, k),
        BoundKind::SelfConfidentK => self_confident_k_rhs(s, p.big_k?),
        BoundKind::AdaptiveMinPenalized => adaptive_min_penalized_rhs(s, k),
        BoundKind::AdaptiveSminK => adaptive_smin_k_rhs(s, p.big_k?),
        BoundKind::IfplVsBeh => ifpl_vs_beh_rhs(s, k, eta_t?),
        BoundKind::HierarchyChain => hierarchy_chain_rhs(s, k, p.horizon),
        BoundKind::LowerBound | BoundKind::FplVsIfpl => return None,
    })
}

fn lhs_of(kind: BoundKind, exact: bool, s: &GameSummary) -> Result<f64> {
    let missing = |what: &str| hypothesis(kind, format!("the game did not record {what}"));
    match kind {
        BoundKind::IfplVsBeh => s.cum_ifpl.ok_or_else(|| missing("the infeasible leader's loss")),
        _ if exact => s.cum_expected.ok_or_else(|| missing("the expected loss")),
        _ => Ok(s.cum_actual),
    }
}

/// Evaluates `kind` on finished replicas of `setup`. With `per_expert`, the
/// margin of every expert is reported and must pass as well.
pub fn evaluate_bound(
    kind: BoundKind,
    setup: &GameSetup,
    summaries: &[GameSummary],
    per_expert: bool,
) -> Result<BoundReport> {
    check_hypotheses(kind, setup)?;
    if summaries.is_empty() {
        return Err(FplError::EmptyHistory);
    }
    let pool = setup.pool.build()?;
    let exact = is_exact(setup) || kind == BoundKind::IfplVsBeh;
    match kind {
        BoundKind::FplVsIfpl => fpl_vs_ifpl(summaries),
        BoundKind::LowerBound => lower_bound(&pool, exact, summaries),
        _ => upper_bound(kind, setup, &pool, exact, summaries, per_expert),
    }
}

fn fpl_vs_ifpl(summaries: &[GameSummary]) -> Result<BoundReport> {
    let kind = BoundKind::FplVsIfpl;
    let mut worst = f64::INFINITY;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for s in summaries {
        let exp_slack = s
            .ifpl_exp_min_slack
            .ok_or_else(|| hypothesis(kind, "the game did not record the infeasible leader's loss"))?;
        let slack = exp_slack.min(s.ifpl_poly_min_slack.unwrap_or(f64::INFINITY));
        if slack < worst {
            worst = slack;
            lhs = s.cum_expected.unwrap_or(f64::NAN);
            rhs = s.ifpl_scaled_sum.unwrap_or(f64::NAN);
        }
    }
    let mut report = BoundReport::deterministic(kind.name(), kind.claim(), Direction::Upper, lhs, rhs, EXACT_SLACK);
    report.slack = worst;
    report.verdict = Verdict::from_bool(worst >= -EXACT_SLACK);
    report.replicas = summaries.len();
    Ok(report.with_note(
        "lhs = l_{1:T}, rhs = sum_t e^eta_t r_t; slack is the smallest per-round margin of both inequalities",
    ))
}

fn lower_bound(pool: &ExpertPool, exact: bool, summaries: &[GameSummary]) -> Result<BoundReport> {
    let kind = BoundKind::LowerBound;
    let mut lhs = Vec::with_capacity(summaries.len());
    let mut rhs = Vec::with_capacity(summaries.len());
    for s in summaries {
        let eta = s.final_eta.ok_or_else(|| hypothesis(kind, "no learning rate recorded"))?;
        lhs.push(lhs_of(kind, exact, s)?);
        rhs.push(lower_bound_rhs(s.best_loss, pool.n(), eta));
    }
    Ok(verdict_from_margins(kind, exact, &lhs, &rhs, Direction::Lower))
}

fn verdict_from_margins(kind: BoundKind, exact: bool, lhs: &[f64], rhs: &[f64], dir: Direction) -> BoundReport {
    let margins: Vec<f64> = lhs
        .iter()
        .zip(rhs)
        .map(|(l, r)| match dir {
            Direction::Upper => r - l,
            Direction::Lower => l - r,
        })
        .collect();
    if exact {
        let r = argmin_by(0..margins.len(), |r| margins[r]).unwrap_or(0);
        let mut report = BoundReport::deterministic(kind.name(), kind.claim(), dir, lhs[r], rhs[r], EXACT_SLACK);
        report.replicas = lhs.len();
        report
    } else {
        let l = mean_stderr(lhs);
        let m = mean_stderr(&margins);
        let rhs_mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        let mut report =
            BoundReport::statistical(kind.name(), kind.claim(), dir, l.mean, l.stderr, rhs_mean, MC_SIGMAS, lhs.len());
        report.slack = m.mean;
        report.slack_stderr = m.stderr;
        report.verdict = Verdict::from_bool(m.mean >= -MC_SIGMAS * m.stderr - EXACT_SLACK);
        report
    }
}

fn upper_bound(
    kind: BoundKind,
    setup: &GameSetup,
    pool: &ExpertPool,
    exact: bool,
    summaries: &[GameSummary],
    per_expert: bool,
) -> Result<BoundReport> {
    let schedule = setup.resolved_schedule();
    let params = Params {
        horizon: setup.horizon as f64,
        big_k: schedule.as_ref().and_then(Schedule::k_bound),
        l: schedule.as_ref().and_then(Schedule::l_bound),
        ratio: match schedule {
            Some(Schedule::StaticRatio { ratio }) => Some(ratio),
            _ => None,
        },
    };
    let n = pool.n();
    let k = pool.complexities();
    let mut lhs = Vec::with_capacity(summaries.len());
    // rhs[r][i], infinite where expert i does not meet the hypothesis.
    let mut table = Vec::with_capacity(summaries.len());
    for s in summaries {
        let l = lhs_of(kind, exact, s)?;
        if let Some(bound) = params.l {
            if matches!(kind, BoundKind::StaticUnit | BoundKind::StaticK) && l > bound + EXACT_SLACK {
                return Err(hypothesis(kind, format!("needs L >= l_{{1:T}}, but L = {bound} < {l}")));
            }
        }
        let row: Vec<f64> = (0..n)
            .map(|i| expert_rhs(kind, &params, s, s.expert_losses[i], k[i]).unwrap_or(f64::INFINITY))
            .collect();
        if row.iter().all(|x| x.is_infinite()) {
            return Err(hypothesis(kind, "no expert meets the per-expert hypothesis"));
        }
        lhs.push(l);
        table.push(row);
    }
    let best_rhs: Vec<f64> = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut report = verdict_from_margins(kind, exact, &lhs, &best_rhs, Direction::Upper);
    // The expert whose bound is tightest on average.
    let mean_rhs = |i: usize| table.iter().map(|row| row[i]).sum::<f64>() / table.len() as f64;
    report.expert = argmin_by(0..n, mean_rhs);

    if per_expert {
        let mut all = Vec::with_capacity(n);
        for i in 0..n {
            if table.iter().any(|row| row[i].is_infinite()) {
                continue;
            }
            let margins: Vec<f64> = table.iter().zip(&lhs).map(|(row, l)| row[i] - l).collect();
            let (slack, se) = if exact {
                (margins.iter().copied().fold(f64::INFINITY, f64::min), 0.0)
            } else {
                let m = mean_stderr(&margins);
                (m.mean, m.stderr)
            };
            let tol = if exact { EXACT_SLACK } else { MC_SIGMAS * se + EXACT_SLACK };
            all.push(ExpertSlack {
                expert: i,
                rhs: mean_rhs(i),
                slack,
                slack_stderr: se,
                verdict: Verdict::from_bool(slack >= -tol),
            });
        }
        if all.iter().any(|e| !e.verdict.passed()) {
            report.verdict = Verdict::Fail;
        }
        report.per_expert = Some(all);
    }
    Ok(report)
}
