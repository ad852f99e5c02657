use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use markov_bernstein_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mb_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_bound_functions() {
    let mut a = 0.0;
    assert_eq!(unsafe { mb_rate_alpha(2.0, 1.0, 1.0, &mut a) }, MbStatus::MbOk);
    // 2 / (sqrt(4) + sqrt(2))^2
    let expected = 2.0 / (2.0 + 2f64.sqrt()).powi(2);
    assert!((a - expected).abs() < 1e-15);

    let mut inv = 0.0;
    assert_eq!(unsafe { mb_rate_alpha_inv(2.0, 1.0, a, &mut inv) }, MbStatus::MbOk);
    assert!((inv - 1.0).abs() < 1e-12);

    let (mut sharp, mut classic) = (0.0, 0.0);
    assert_eq!(unsafe { mb_tail_envelope(2.0, 1.0, 1.0, 10.0, 1.0, 0, &mut sharp) }, MbStatus::MbOk);
    assert_eq!(unsafe { mb_tail_envelope(2.0, 1.0, 1.0, 10.0, 1.0, 1, &mut classic) }, MbStatus::MbOk);
    assert!((sharp - (-10.0 * a).exp()).abs() < 1e-15);
    assert!(sharp <= classic);

    assert_eq!(unsafe { mb_tail_envelope(2.0, 1.0, 1.0, 10.0, -1.0, 0, &mut sharp) }, MbStatus::MbDomain);
    assert!(!last_error().is_empty());
}

#[test]
fn mm_infinity_handle() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mb_birth_death_mm_infinity(2.0, 0, &mut h) }, MbStatus::MbOk);
    assert!(!h.is_null());
    let n = unsafe { mb_birth_death_truncation(h) };
    assert!(n > 10);

    let mut len = 0usize;
    assert_eq!(unsafe { mb_birth_death_stationary(h, ptr::null_mut(), 0, &mut len) }, MbStatus::MbOk);
    assert_eq!(len, n + 1);
    let mut pi = vec![0.0; len];
    assert_eq!(unsafe { mb_birth_death_stationary(h, pi.as_mut_ptr(), len, &mut len) }, MbStatus::MbOk);
    assert!((pi[0] - (-2f64).exp()).abs() < 1e-12);

    let mut gap = 0.0;
    assert_eq!(unsafe { mb_birth_death_spectral_gap(h, &mut gap) }, MbStatus::MbOk);
    assert!((gap - 1.0).abs() < 1e-8);

    let identity = [0.0, 1.0];
    let mut s2 = 0.0;
    assert_eq!(unsafe { mb_birth_death_asymptotic_variance(h, identity.as_ptr(), 2, &mut s2) }, MbStatus::MbOk);
    assert!((s2 - 4.0).abs() < 1e-8);

    // Poisson log-MGF: lambda s^2 / (1 - s)
    let mut lam = 0.0;
    assert_eq!(unsafe { mb_birth_death_log_mgf_rate(h, identity.as_ptr(), 2, 0.25, &mut lam) }, MbStatus::MbOk);
    assert!((lam - 2.0 * 0.0625 / 0.75).abs() < 1e-6, "{lam}");

    let mut est = MbTailEstimate::default();
    assert_eq!(
        unsafe { mb_birth_death_tail_estimate(h, identity.as_ptr(), 2, 5.0, 1.0, 2000, 7, &mut est) },
        MbStatus::MbOk
    );
    assert_eq!(est.n_paths, 2000);
    assert!(est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);

    assert_eq!(
        unsafe { mb_birth_death_tail_estimate(h, identity.as_ptr(), 2, 5.0, 1.0, 0, 7, &mut est) },
        MbStatus::MbPrecondition
    );
    unsafe { mb_birth_death_free(h) };
    unsafe { mb_birth_death_free(ptr::null_mut()) };
}

#[test]
fn table_and_bad_inputs() {
    let birth = [1.0, 2.0, 0.0];
    let death = [0.0, 1.0, 3.0];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mb_birth_death_from_table(birth.as_ptr(), death.as_ptr(), 3, &mut h) }, MbStatus::MbOk);
    assert_eq!(unsafe { mb_birth_death_truncation(h) }, 2);
    unsafe { mb_birth_death_free(h) };

    let bad = [1.0, 0.0, 0.0];
    let mut h2 = ptr::null_mut();
    let s = unsafe { mb_birth_death_from_table(bad.as_ptr(), death.as_ptr(), 3, &mut h2) };
    assert_ne!(s, MbStatus::MbOk);
    assert!(h2.is_null());
    assert_eq!(
        unsafe { mb_birth_death_from_table(ptr::null(), death.as_ptr(), 3, &mut h2) },
        MbStatus::MbNullPointer
    );
    assert_eq!(unsafe { mb_birth_death_mm_infinity(-1.0, 0, &mut h2) }, MbStatus::MbSpec);
    assert_eq!(unsafe { mb_birth_death_spectral_gap(ptr::null(), &mut 0.0) }, MbStatus::MbNullPointer);
}

#[test]
fn errors_are_thread_local() {
    let mut x = 0.0;
    assert_eq!(unsafe { mb_rate_alpha(-1.0, 1.0, 1.0, &mut x) }, MbStatus::MbDomain);
    let other = std::thread::spawn(|| mb_last_error().is_null()).join().unwrap();
    assert!(other);
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("markov_bernstein.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for name in [
        "mb_last_error",
        "mb_version",
        "mb_rate_alpha",
        "mb_rate_alpha_inv",
        "mb_tail_envelope",
        "mb_birth_death_mm_infinity",
        "mb_birth_death_subgeometric",
        "mb_birth_death_from_table",
        "mb_birth_death_free",
        "mb_birth_death_truncation",
        "mb_birth_death_stationary",
        "mb_birth_death_spectral_gap",
        "mb_birth_death_asymptotic_variance",
        "mb_birth_death_log_mgf_rate",
        "mb_birth_death_tail_estimate",
        "typedef struct MbBirthDeath MbBirthDeath",
        "MB_NULL_POINTER = 12",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "markov_bernstein.h"

int main(void) {
    double a = 0.0;
    if (mb_rate_alpha(2.0, 1.0, 1.0, &a) != MB_OK) return 1;
    MbBirthDeath *h = NULL;
    if (mb_birth_death_mm_infinity(1.0, 0, &h) != MB_OK) return 2;
    double coeffs[2] = {0.0, 1.0};
    double s2 = 0.0;
    if (mb_birth_death_asymptotic_variance(h, coeffs, 2, &s2) != MB_OK) return 3;
    mb_birth_death_free(h);
    if (mb_rate_alpha(-1.0, 1.0, 1.0, &a) != MB_DOMAIN || mb_last_error() == NULL) return 4;
    printf("%.6f\n", s2);
    return fabs(s2 - 2.0) < 1e-6 ? 0 : 5;
}
"#;

/// Compile and run a C client against the static library when a C compiler
/// and the archive are present; otherwise report the skip.
#[test]
fn c_client_links_and_runs() {
    let target = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/debug");
    let archive = target.join("libmarkov_bernstein_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2.000000");
}
