//! Independent replicas of a game, run in parallel.

use rayon::prelude::*;
use serde::Serialize;

use super::setup::GameSetup;
use super::stats::mean_stderr;
use super::{GameSummary, GameTrace, TraceDetail};
use crate::error::{FplError, Result};

/// Summaries of all replicas, in replica order, plus the full trace of replica 0.
#[derive(Debug, Clone)]
pub struct ReplicaSet {
    pub summaries: Vec<GameSummary>,
    pub first_trace: GameTrace,
}

/// Plays replicas `0..replicas`. Results do not depend on thread count.
pub fn run_replicas(setup: &GameSetup, replicas: usize) -> Result<ReplicaSet> {
    if replicas == 0 {
        return Err(FplError::param("replicas", "must be at least 1"));
    }
    let first_trace = setup.run_replica(0, TraceDetail::Full)?;
    let rest: Vec<GameSummary> = (1..replicas as u64)
        .into_par_iter()
        .map(|r| setup.run_replica(r, TraceDetail::Summary).map(|t| t.summary))
        .collect::<Result<_>>()?;
    let mut summaries = Vec::with_capacity(replicas);
    summaries.push(first_trace.summary.clone());
    summaries.extend(rest);
    Ok(ReplicaSet {
        summaries,
        first_trace,
    })
}

/// Mean regret `u_{1:T} - s_{1:T}^min` over replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegretEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
}

impl RegretEstimate {
    pub fn from_summaries(summaries: &[GameSummary]) -> Self {
        let regrets: Vec<f64> = summaries.iter().map(GameSummary::regret_actual).collect();
        let e = mean_stderr(&regrets);
        Self {
            mean: e.mean,
            stderr: e.stderr,
            replicas: e.samples,
        }
    }
}

pub fn monte_carlo_regret(setup: &GameSetup, replicas: usize) -> Result<RegretEstimate> {
    let set = run_replicas(setup, replicas)?;
    Ok(RegretEstimate::from_summaries(&set.summaries))
}
