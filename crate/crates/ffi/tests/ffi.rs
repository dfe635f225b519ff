use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fpl_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fpl_last_error_message()) }.to_string_lossy().into_owned()
}

fn new_predictor(n: usize, schedule: &str, track: i32) -> (FplStatus, *mut FplPredictor) {
    let json = CString::new(schedule).unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { fpl_predictor_new(n, ptr::null(), json.as_ptr(), FplRegime::FreshPerStep, 7, 0, track, &mut h) };
    (st, h)
}

#[test]
fn predictor_round_trip() {
    let (st, h) = new_predictor(2, r#"{"kind":"dynamic-kt","k":0.6931471805599453}"#, 1);
    assert_eq!(st, FplStatus::Ok, "{}", last_error());
    let losses = [[0.0, 0.5], [1.0, 0.0], [0.0, 1.0]];
    let mut total = 0.0;
    for row in &losses {
        let (mut i, mut eta) = (usize::MAX, 0.0);
        assert_eq!(unsafe { fpl_predictor_decide(h, &mut i, &mut eta) }, FplStatus::Ok);
        assert!(i < 2 && eta > 0.0);
        let (mut u, mut l) = (0.0, 0.0);
        assert_eq!(unsafe { fpl_predictor_observe(h, row.as_ptr(), 2, &mut u, &mut l) }, FplStatus::Ok);
        assert_eq!(u, row[i]);
        assert!((0.0..=1.0).contains(&l));
        total += u;
    }
    let mut cum = [0.0; 2];
    assert_eq!(unsafe { fpl_predictor_expert_losses(h, cum.as_mut_ptr(), 2) }, FplStatus::Ok);
    assert_eq!(cum, [1.0, 1.5]);
    assert!(total <= 3.0);
    unsafe { fpl_predictor_free(h) };
}

#[test]
fn errors_are_reported() {
    let (st, h) = new_predictor(2, r#"{"kind":"no-such-rate"}"#, 0);
    assert_eq!(st, FplStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("schedule"));

    let (st, h) = new_predictor(2, r#"{"kind":"dynamic-t"}"#, 0);
    assert_eq!(st, FplStatus::Ok);
    let row = [0.0, 0.0];
    assert_eq!(
        unsafe { fpl_predictor_observe(h, row.as_ptr(), 2, ptr::null_mut(), ptr::null_mut()) },
        FplStatus::InvalidState
    );
    let mut i = 0;
    unsafe { fpl_predictor_decide(h, &mut i, ptr::null_mut()) };
    let bad = [0.0, 2.0];
    assert_eq!(
        unsafe { fpl_predictor_observe(h, bad.as_ptr(), 2, ptr::null_mut(), ptr::null_mut()) },
        FplStatus::InvalidArgument
    );
    assert!(last_error().contains("outside"));
    assert_eq!(unsafe { fpl_predictor_decide(ptr::null_mut(), &mut i, ptr::null_mut()) }, FplStatus::NullPointer);
    unsafe { fpl_predictor_free(h) };
    unsafe { fpl_predictor_free(ptr::null_mut()) };
}

#[test]
fn choice_probabilities_match_closed_form() {
    let scores = [0.0, 1.0];
    let mut p = [0.0; 2];
    assert_eq!(unsafe { fpl_choice_probabilities(scores.as_ptr(), 2, 1.0, p.as_mut_ptr()) }, FplStatus::Ok);
    let want = 1.0 - (-1.0f64).exp() / 2.0;
    assert!((p[0] - want).abs() < 1e-12);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    let mut out = 0.0;
    let k = [0.0];
    assert_eq!(unsafe { fpl_shifted_max_cdf(1.0, k.as_ptr(), 1, &mut out) }, FplStatus::Ok);
    assert!((out - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn scenario_report_as_json() {
    let name = CString::new("fl-failure").unwrap();
    let (mut passed, mut json) = (0, ptr::null_mut());
    let st = unsafe { fpl_run_scenario(name.as_ptr(), 0, 0, 0, &mut passed, &mut json) };
    assert_eq!(st, FplStatus::Ok, "{}", last_error());
    assert_eq!(passed, 1);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { fpl_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["scenario"], "fl-failure");
    assert_eq!(v["checks"][0]["verdict"], "pass");

    let bad = CString::new("missing").unwrap();
    let st = unsafe { fpl_run_scenario(bad.as_ptr(), 0, 0, 0, ptr::null_mut(), &mut json) };
    assert_eq!(st, FplStatus::Config);
    assert!(json.is_null());
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(manifest_dir().join("include/fpl.h")).unwrap();
    for name in [
        "fpl_predictor_new",
        "fpl_predictor_decide",
        "fpl_predictor_observe",
        "fpl_predictor_free",
        "fpl_choice_probabilities",
        "fpl_shifted_max_cdf",
        "fpl_run_scenario",
        "fpl_string_free",
        "fpl_last_error_message",
        "FPL_STATUS_OK",
        "typedef struct FplPredictor FplPredictor",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let target = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = target.join("libfpl_ffi.so");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no shared library or C compiler");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <math.h>
#include "fpl.h"
int main(void) {
    double scores[2] = {0.0, 1.0}, p[2];
    if (fpl_choice_probabilities(scores, 2, 1.0, p) != FPL_STATUS_OK) return 1;
    if (fabs(p[0] - (1.0 - exp(-1.0) / 2.0)) > 1e-12) return 2;
    FplPredictor *h = NULL;
    if (fpl_predictor_new(3, NULL, "{\"kind\":\"dynamic-t\"}", FPL_REGIME_FRESH_PER_STEP, 1, 0, 1, &h) != FPL_STATUS_OK) return 3;
    double losses[3] = {0.2, 0.4, 0.6}, u, l;
    size_t i;
    for (int t = 0; t < 10; t++) {
        if (fpl_predictor_decide(h, &i, NULL) != FPL_STATUS_OK) return 4;
        if (fpl_predictor_observe(h, losses, 3, &u, &l) != FPL_STATUS_OK) return 5;
    }
    fpl_predictor_free(h);
    if (fpl_predictor_new(2, NULL, "{\"kind\":\"bogus\"}", FPL_REGIME_FRESH_PER_STEP, 1, 0, 0, &h) != FPL_STATUS_CONFIG) return 6;
    printf("%s\n", fpl_last_error_message());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg("-L")
        .arg(&target)
        .arg("-lfpl_ffi")
        .arg("-lm")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).env("LD_LIBRARY_PATH", &target).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("schedule"));
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("fpl-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
