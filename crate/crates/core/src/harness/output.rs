//! Trace CSV and report JSON.
//!
//! Everything except the timestamp on the first line of a report is a pure
//! function of the configuration and seed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::bounds::BoundReport;
use super::GameTrace;
use crate::error::Result;

pub const TRACE_HEADER: [&str; 7] = ["t", "eta", "decision", "u_t", "ell_t", "cum_u", "cum_best"];

/// Writes one row per round. Missing values are empty cells.
pub fn write_trace_csv<W: Write>(trace: &GameTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (rec, cum) in trace.rounds.iter().zip(trace.cumulative_actual()) {
        w.write_record([
            rec.t.to_string(),
            opt(rec.eta),
            rec.chosen.to_string(),
            rec.actual_loss.to_string(),
            opt(rec.expected_loss),
            cum.to_string(),
            rec.cum_best.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &GameTrace, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_trace_csv(trace, fs::File::create(path)?)
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// The resolved configuration.
    pub config: serde_json::Value,
    pub checks: Vec<BoundReport>,
    /// Recorded values without a pass/fail claim.
    pub observations: BTreeMap<String, serde_json::Value>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new(scenario: Option<String>, config: serde_json::Value) -> Self {
        Self {
            scenario,
            config,
            checks: Vec::new(),
            observations: BTreeMap::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, check: BoundReport) {
        self.passed &= check.passed();
        self.checks.push(check);
    }

    pub fn observe(&mut self, key: impl Into<String>, value: impl Serialize) -> Result<()> {
        self.observations.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn failures(&self) -> Vec<&BoundReport> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    /// Pretty JSON whose first line holds the timestamp and nothing else.
    pub fn to_json(&self, generated_at_unix: u64) -> Result<String> {
        let body = serde_json::to_string_pretty(self)?;
        let rest = body.strip_prefix('{').unwrap_or(&body);
        Ok(format!("{{\"generated_at_unix\":{generated_at_unix},{rest}\n"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json(unix_now())?)?;
        Ok(())
    }

    /// Machine-readable list of failed checks.
    pub fn failures_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Failures<'a> {
            scenario: Option<&'a str>,
            failures: Vec<&'a BoundReport>,
        }
        Ok(serde_json::to_string_pretty(&Failures {
            scenario: self.scenario.as_deref(),
            failures: self.failures(),
        })?)
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
