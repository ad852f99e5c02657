//! C ABI over `markov_bernstein`.
//!
//! Every fallible function returns an [`MbStatus`] and writes results through
//! out-pointers. On failure the message is available from [`mb_last_error`]
//! on the same thread. Chains live behind the opaque [`MbBirthDeath`] handle,
//! created by the `mb_birth_death_*` constructors and released with
//! [`mb_birth_death_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markov_bernstein::bound_algebra::{rate_alpha, rate_alpha_inv, tail_envelope, tail_envelope_classic};
use markov_bernstein::chain_models::{center_observable, choose_truncation, invariant_measure, BirthDeathSpec};
use markov_bernstein::simulation::{mc_tail_estimate, McConfig, ProcessModel};
use markov_bernstein::spectral::{asymptotic_variance, build_generator, schrodinger_top_eig, spectral_gap, GeneratorMatrix};
use markov_bernstein::{BernsteinParams, Error, Observable, StationaryMeasure};

/// Result codes. `MB_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    MbOk = 0,
    MbDomain = 1,
    MbDegenerate = 2,
    MbSpec = 3,
    MbPrecondition = 4,
    MbTruncation = 5,
    MbNumeric = 6,
    MbCapability = 7,
    MbIntegration = 8,
    MbStateCap = 9,
    MbRouteInapplicable = 10,
    MbIo = 11,
    MbNullPointer = 12,
    MbPanic = 13,
}

impl From<&Error> for MbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => MbStatus::MbDomain,
            Error::DegenerateObservable => MbStatus::MbDegenerate,
            Error::Spec(_) => MbStatus::MbSpec,
            Error::Precondition(_) => MbStatus::MbPrecondition,
            Error::Truncation { .. } => MbStatus::MbTruncation,
            Error::Numeric(_) => MbStatus::MbNumeric,
            Error::Capability(_) => MbStatus::MbCapability,
            Error::Integration { .. } => MbStatus::MbIntegration,
            Error::StateCap { .. } => MbStatus::MbStateCap,
            Error::RouteInapplicable(_) => MbStatus::MbRouteInapplicable,
            Error::Io(_) | Error::Json(_) => MbStatus::MbIo,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Run `f`, translate errors and panics into a status and record the message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbStatus::MbOk,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            MbStatus::from(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            MbStatus::MbNullPointer
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            MbStatus::MbPanic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Message of the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `alpha(r)` for variance proxy `sigma2` and scale `m`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn mb_rate_alpha(sigma2: f64, m: f64, r: f64, out: *mut f64) -> MbStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = rate_alpha(&BernsteinParams::stationary(sigma2, m)?, r)?;
        Ok(())
    })
}

/// `alpha^-1(x) = sqrt(2 sigma2 x) + m x`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn mb_rate_alpha_inv(sigma2: f64, m: f64, x: f64, out: *mut f64) -> MbStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = rate_alpha_inv(&BernsteinParams::stationary(sigma2, m)?, x)?;
        Ok(())
    })
}

/// `min(1, prefactor * exp(-t alpha(r)))`. Set `classic` nonzero for the
/// looser `r^2 / (2 (sigma2 + m r))` exponent.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn mb_tail_envelope(
    sigma2: f64,
    m: f64,
    prefactor: f64,
    t: f64,
    r: f64,
    classic: i32,
    out: *mut f64,
) -> MbStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let params = BernsteinParams::new(sigma2, m, prefactor)?;
        *out = if classic != 0 { tail_envelope_classic(&params, t, r)? } else { tail_envelope(&params, t, r)? };
        Ok(())
    })
}

/// A birth-death chain truncated to `0..=N`, with its stationary law and
/// generator.
pub struct MbBirthDeath {
    spec: BirthDeathSpec,
    measure: StationaryMeasure,
    generator: GeneratorMatrix,
}

impl MbBirthDeath {
    fn build(spec: BirthDeathSpec, n: usize) -> Result<Box<Self>, Error> {
        let n = match (n, spec.max_state()) {
            (0, Some(max)) => max,
            (0, None) => choose_truncation(&spec, 1e-12, 100_000)?,
            (n, _) => n,
        };
        let measure = invariant_measure(&spec, n)?;
        let generator = build_generator(&spec, n)?;
        Ok(Box::new(Self { spec, measure, generator }))
    }

    fn centered(&self, coeffs: &[f64]) -> Observable {
        center_observable(&Observable::polynomial(coeffs.to_vec()), &self.measure)
    }
}

fn emit_handle(
    out: *mut *mut MbBirthDeath,
    make: impl FnOnce() -> Result<Box<MbBirthDeath>, Error>,
) -> MbStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        *out = Box::into_raw(make()?);
        Ok(())
    })
}

/// M/M/infinity chain with arrival rate `lambda`. `n = 0` picks the
/// truncation automatically.
///
/// # Safety
/// `out` must be a valid pointer. Release the handle with `mb_birth_death_free`.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_mm_infinity(lambda: f64, n: usize, out: *mut *mut MbBirthDeath) -> MbStatus {
    emit_handle(out, || MbBirthDeath::build(BirthDeathSpec::mm_infinity(lambda)?, n))
}

/// Chain with polynomially decaying stationary tail of exponent `a`.
///
/// # Safety
/// `out` must be a valid pointer. Release the handle with `mb_birth_death_free`.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_subgeometric(a: f64, n: usize, out: *mut *mut MbBirthDeath) -> MbStatus {
    emit_handle(out, || MbBirthDeath::build(BirthDeathSpec::subgeometric(a)?, n))
}

/// Finite chain on `0..len-1` from birth rates `birth[k]` and death rates
/// `death[k]`.
///
/// # Safety
/// `birth` and `death` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_from_table(
    birth: *const f64,
    death: *const f64,
    len: usize,
    out: *mut *mut MbBirthDeath,
) -> MbStatus {
    let rows = match unsafe { (slice(birth, len, "birth"), slice(death, len, "death")) } {
        (Ok(b), Ok(d)) => b.iter().copied().zip(d.iter().copied()).collect::<Vec<_>>(),
        _ => return guard(|| Err(Failure::Null("birth/death"))),
    };
    emit_handle(out, || MbBirthDeath::build(BirthDeathSpec::from_table(&rows)?, 0))
}

/// Release a handle. NULL is ignored.
///
/// # Safety
/// `h` must come from an `mb_birth_death_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_free(h: *mut MbBirthDeath) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Largest state kept, or 0 for NULL.
///
/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_truncation(h: *const MbBirthDeath) -> usize {
    unsafe { h.as_ref() }.map_or(0, |h| h.measure.truncation)
}

/// Copy the stationary probabilities into `out[0..len]`; `written` receives
/// the number of states (call with `len = 0` to query it).
///
/// # Safety
/// `h` must be live; `out` must hold `len` doubles; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_stationary(
    h: *const MbBirthDeath,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> MbStatus {
    guard(|| {
        let h = unsafe { h.as_ref() }.ok_or(Failure::Null("handle"))?;
        let written = unsafe { out_ref(written, "written") }?;
        let w = &h.measure.weights;
        *written = w.len();
        if len > 0 {
            if out.is_null() {
                return Err(Failure::Null("out"));
            }
            let k = len.min(w.len());
            unsafe { ptr::copy_nonoverlapping(w.as_ptr(), out, k) };
        }
        Ok(())
    })
}

/// Spectral gap of the truncated generator.
///
/// # Safety
/// `h` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_spectral_gap(h: *const MbBirthDeath, out: *mut f64) -> MbStatus {
    guard(|| {
        let h = unsafe { h.as_ref() }.ok_or(Failure::Null("handle"))?;
        *unsafe { out_ref(out, "out") }? = spectral_gap(&h.generator)?.lambda_1;
        Ok(())
    })
}

/// Asymptotic variance of the centered polynomial `sum coeffs[k] n^k`.
///
/// # Safety
/// `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_asymptotic_variance(
    h: *const MbBirthDeath,
    coeffs: *const f64,
    n_coeffs: usize,
    out: *mut f64,
) -> MbStatus {
    guard(|| {
        let h = unsafe { h.as_ref() }.ok_or(Failure::Null("handle"))?;
        let c = unsafe { slice(coeffs, n_coeffs, "coeffs") }?;
        *unsafe { out_ref(out, "out") }? = asymptotic_variance(&h.generator, &h.centered(c))?;
        Ok(())
    })
}

/// Top eigenvalue of `L + s g` for the centered polynomial `g`.
///
/// # Safety
/// `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_log_mgf_rate(
    h: *const MbBirthDeath,
    coeffs: *const f64,
    n_coeffs: usize,
    s: f64,
    out: *mut f64,
) -> MbStatus {
    guard(|| {
        let h = unsafe { h.as_ref() }.ok_or(Failure::Null("handle"))?;
        let c = unsafe { slice(coeffs, n_coeffs, "coeffs") }?;
        *unsafe { out_ref(out, "out") }? = schrodinger_top_eig(&h.generator, &h.centered(c), s)?;
        Ok(())
    })
}

/// Monte Carlo estimate of `P(time average of centered g >= r)` with a
/// Wilson 95% interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MbTailEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: usize,
    pub n_paths: usize,
}

/// Simulate `n_paths` stationary paths up to `t`.
///
/// # Safety
/// `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_birth_death_tail_estimate(
    h: *const MbBirthDeath,
    coeffs: *const f64,
    n_coeffs: usize,
    t: f64,
    r: f64,
    n_paths: usize,
    seed: u64,
    out: *mut MbTailEstimate,
) -> MbStatus {
    guard(|| {
        let h = unsafe { h.as_ref() }.ok_or(Failure::Null("handle"))?;
        let c = unsafe { slice(coeffs, n_coeffs, "coeffs") }?;
        let out = unsafe { out_ref(out, "out") }?;
        let process = ProcessModel::birth_death(h.spec.clone(), Some(&h.measure));
        let est = mc_tail_estimate(&process, &h.centered(c), t, r, &McConfig::new(n_paths, seed))?;
        *out = MbTailEstimate {
            p_hat: est.p_hat,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            hits: est.hits,
            n_paths: est.n_paths,
        };
        Ok(())
    })
}
