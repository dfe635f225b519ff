//! C ABI for the `fpl` crate.
//!
//! Every fallible function returns an [`FplStatus`]; on failure the message is
//! available from [`fpl_last_error_message`] on the same thread. Predictors are
//! opaque handles created by [`fpl_predictor_new`] and released with
//! [`fpl_predictor_free`]. Strings returned by the library are released with
//! [`fpl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fpl::exact::{choice_probabilities, PenalizedScore};
use fpl::perturbation::shifted_max_cdf;
use fpl::predictors::{FplOptions, Learner};
use fpl::scenarios::{run_scenario, Overrides};
use fpl::{ExpertPool, FplError, LossVector, Regime, Schedule};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FplStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Hypothesis = 4,
    Numerical = 5,
    InvalidState = 6,
    Io = 7,
    Panic = 8,
}

/// Perturbation regime.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FplRegime {
    FreshPerStep = 0,
    InitialOnce = 1,
}

/// Opaque FPL predictor.
pub struct FplPredictor {
    inner: fpl::predictors::FplPredictor,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &FplError) -> FplStatus {
    match e {
        FplError::Config(_) => FplStatus::Config,
        FplError::Hypothesis { .. } => FplStatus::Hypothesis,
        FplError::SubsetCapExceeded { .. }
        | FplError::QuadratureNonConvergence { .. }
        | FplError::NormalizationDefect(_) => FplStatus::Numerical,
        FplError::NoPendingDecision | FplError::EmptyHistory | FplError::RateIncreased { .. } => {
            FplStatus::InvalidState
        }
        FplError::Io(_) | FplError::Csv(_) | FplError::Json(_) => FplStatus::Io,
        _ => FplStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (FplStatus, String)>) -> FplStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FplStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FplStatus::Panic
        }
    }
}

fn lift<T>(r: fpl::Result<T>) -> Result<T, (FplStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (FplStatus, String) {
    (FplStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or point to `n` readable doubles.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (FplStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FplStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FplStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn fpl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a predictor over `n` experts.
///
/// `complexities` holds `n` values, or is null for `k_i = ln n`.
/// `schedule_json` describes the rate, e.g. `{"kind":"dynamic-kt","k":0.69}`.
/// With `track_expected` nonzero, every observe reports the exact expected loss.
///
/// # Safety
/// Pointers must be valid as described; `out` receives the handle.
#[no_mangle]
pub unsafe extern "C" fn fpl_predictor_new(
    n: usize,
    complexities: *const f64,
    schedule_json: *const c_char,
    regime: FplRegime,
    seed: u64,
    replica: u64,
    track_expected: i32,
    out: *mut *mut FplPredictor,
) -> FplStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pool = if complexities.is_null() {
            lift(ExpertPool::uniform(n))?
        } else {
            lift(ExpertPool::new(slice(complexities, n, "complexities")?.to_vec()))?
        };
        let text = string(schedule_json, "schedule_json")?;
        let schedule: Schedule = serde_json::from_str(text)
            .map_err(|e| (FplStatus::Config, format!("schedule: {e}")))?;
        lift(schedule.validate())?;
        let regime = match regime {
            FplRegime::FreshPerStep => Regime::FreshPerStep,
            FplRegime::InitialOnce => Regime::InitialOnce,
        };
        let options = FplOptions {
            track_expected: track_expected != 0,
            ifpl_diagnostic: false,
            mc_samples: FplOptions::DEFAULT_MC_SAMPLES,
        };
        let inner = lift(fpl::predictors::FplPredictor::seeded(
            pool, schedule, regime, seed, replica, options,
        ))?;
        *out = Box::into_raw(Box::new(FplPredictor { inner }));
        Ok(())
    })
}

/// Draws the decision for the next round.
///
/// # Safety
/// `handle` must come from [`fpl_predictor_new`]; `expert` must be writable;
/// `eta` may be null.
#[no_mangle]
pub unsafe extern "C" fn fpl_predictor_decide(handle: *mut FplPredictor, expert: *mut usize, eta: *mut f64) -> FplStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if expert.is_null() {
            return Err(null("expert"));
        }
        let play = lift(h.inner.decide())?;
        *expert = play.chosen;
        if !eta.is_null() {
            *eta = play.eta.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Reveals the round's losses. `expected_loss` receives NaN unless the
/// predictor tracks expected losses; either output may be null.
///
/// # Safety
/// `losses` must point to `n` doubles matching the predictor's size.
#[no_mangle]
pub unsafe extern "C" fn fpl_predictor_observe(
    handle: *mut FplPredictor,
    losses: *const f64,
    n: usize,
    actual_loss: *mut f64,
    expected_loss: *mut f64,
) -> FplStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        let v = lift(LossVector::new(slice(losses, n, "losses")?.to_vec()))?;
        let rec = lift(h.inner.observe(&v))?;
        if !actual_loss.is_null() {
            *actual_loss = rec.actual_loss;
        }
        if !expected_loss.is_null() {
            *expected_loss = rec.expected_loss.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Cumulative loss of each expert so far, written to `out[0..n]`.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fpl_predictor_expert_losses(handle: *const FplPredictor, out: *mut f64, n: usize) -> FplStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let cum = h.inner.state().cum_loss();
        if n != cum.len() {
            return Err((
                FplStatus::InvalidArgument,
                format!("buffer holds {n} values, predictor has {}", cum.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(cum);
        Ok(())
    })
}

/// Releases a predictor. Null is ignored.
///
/// # Safety
/// `handle` must come from [`fpl_predictor_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fpl_predictor_free(handle: *mut FplPredictor) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Exact `P[I = i]` for penalized scores `s_i + k_i/eta`; `+inf` marks an
/// inactive expert. Writes `n` probabilities to `out`.
///
/// # Safety
/// `scores` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn fpl_choice_probabilities(scores: *const f64, n: usize, eta: f64, out: *mut f64) -> FplStatus {
    guard(|| {
        let s = lift(PenalizedScore::new(slice(scores, n, "scores")?.to_vec()))?;
        let p = lift(choice_probabilities(&s, eta))?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&p);
        Ok(())
    })
}

/// `P[max_i (q_i - k_i) >= a]` for independent Exp(1) draws `q_i`.
///
/// # Safety
/// `k` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpl_shifted_max_cdf(a: f64, k: *const f64, n: usize, out: *mut f64) -> FplStatus {
    guard(|| {
        let k = slice(k, n, "k")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = shifted_max_cdf(a, k);
        Ok(())
    })
}

/// Runs a built-in scenario and returns its report as JSON in `json_out`,
/// to be released with [`fpl_string_free`]. `seed` and `replicas` override the
/// scenario's defaults when `has_seed` / `replicas` are nonzero. `passed`
/// (nullable) receives 1 when every check passed.
///
/// # Safety
/// `name` must be a NUL-terminated string and `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn fpl_run_scenario(
    name: *const c_char,
    has_seed: i32,
    seed: u64,
    replicas: usize,
    passed: *mut i32,
    json_out: *mut *mut c_char,
) -> FplStatus {
    guard(|| {
        if json_out.is_null() {
            return Err(null("json_out"));
        }
        *json_out = ptr::null_mut();
        let name = string(name, "name")?;
        let overrides = Overrides {
            seed: (has_seed != 0).then_some(seed),
            replicas: (replicas != 0).then_some(replicas),
        };
        let out = lift(run_scenario(name, overrides))?;
        let json = serde_json::to_string(&out.report).map_err(|e| (FplStatus::Io, e.to_string()))?;
        if !passed.is_null() {
            *passed = out.report.passed as i32;
        }
        *json_out = CString::new(json)
            .map_err(|e| (FplStatus::Io, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fpl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
