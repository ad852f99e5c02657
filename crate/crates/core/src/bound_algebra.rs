//! Bernstein rate function, its right inverse, the Laplace envelope and the
//! tail envelopes they generate.
//!
//! For a centered observable with asymptotic variance `σ²` and scale `M`,
//! the Bernstein exponent per unit time is
//!
//! ```text
//! α(r) = 2r² / (σ² (√(1 + 2Mr/σ²) + 1)²),      r ≥ 0
//! ```
//!
//! with right inverse `α⁻¹(x) = √(2σ²x) + Mx`, and it is the Legendre dual of
//! the Laplace envelope `λ ↦ λ²σ² / (2(1 − λM))` on `[0, 1/M)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `(σ², M, ‖dβ/dμ‖₂)` triple parameterizing every tail envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinParams {
    /// Asymptotic variance, units of g² × time.
    pub sigma2: f64,
    /// Scale constant, units of g × time.
    pub m_const: f64,
    /// `‖dβ/dμ‖₂` of the initial law; 1 for a stationary start.
    pub prefactor: f64,
}

impl BernsteinParams {
    pub fn new(sigma2: f64, m_const: f64, prefactor: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::domain(format!("sigma2 must be finite and >= 0, got {sigma2}")));
        }
        if !(m_const >= 0.0) || !m_const.is_finite() {
            return Err(Error::domain(format!("M must be finite and >= 0, got {m_const}")));
        }
        if !(prefactor >= 1.0) || !prefactor.is_finite() {
            return Err(Error::domain(format!("prefactor must be finite and >= 1, got {prefactor}")));
        }
        Ok(Self { sigma2, m_const, prefactor })
    }

    /// Parameters for a stationary start (`prefactor = 1`).
    pub fn stationary(sigma2: f64, m_const: f64) -> Result<Self> {
        Self::new(sigma2, m_const, 1.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma2 == 0.0 && self.m_const == 0.0
    }

    fn check_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateObservable)
        } else {
            Ok(())
        }
    }
}

/// Bernstein exponent `α(r)`.
///
/// Evaluated as `2r² / (√(σ² + 2Mr) + σ)²`, algebraically identical to the
/// textbook form and finite at `σ² = 0`, where it reduces to the linear rate
/// `r / M`. With `M = 0` it is the Gaussian rate `r² / (2σ²)`.
pub fn rate_alpha(params: &BernsteinParams, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("rate argument r must be >= 0, got {r}")));
    }
    params.check_nondegenerate()?;
    if r == 0.0 {
        return Ok(0.0);
    }
    if r.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let sigma = params.sigma2.sqrt();
    let denom = (params.sigma2 + 2.0 * params.m_const * r).sqrt() + sigma;
    Ok(2.0 * r * r / (denom * denom))
}

/// Right inverse `α⁻¹(x) = √(2σ²x) + Mx`.
pub fn rate_alpha_inv(params: &BernsteinParams, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("argument x must be >= 0, got {x}")));
    }
    Ok((2.0 * params.sigma2 * x).sqrt() + params.m_const * x)
}

fn check_time_level(t: f64, r: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time horizon t must be > 0, got {t}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("level r must be > 0, got {r}")));
    }
    Ok(())
}

/// `prefactor · exp(−t α(r))` without clamping; useful for rate studies.
pub fn tail_envelope_unclamped(params: &BernsteinParams, t: f64, r: f64) -> Result<f64> {
    check_time_level(t, r)?;
    Ok(params.prefactor * (-t * rate_alpha(params, r)?).exp())
}

/// Sharp Bernstein tail envelope `min(1, prefactor · exp(−t α(r)))`.
pub fn tail_envelope(params: &BernsteinParams, t: f64, r: f64) -> Result<f64> {
    Ok(tail_envelope_unclamped(params, t, r)?.min(1.0))
}

/// Classical envelope `min(1, prefactor · exp(−t r² / (2(σ² + Mr))))`.
pub fn tail_envelope_classic(params: &BernsteinParams, t: f64, r: f64) -> Result<f64> {
    check_time_level(t, r)?;
    params.check_nondegenerate()?;
    let exponent = r * r / (2.0 * (params.sigma2 + params.m_const * r));
    Ok((params.prefactor * (-t * exponent).exp()).min(1.0))
}

/// Laplace envelope `λ²σ² / (2(1 − λM))`, `+∞` from the pole `1/M` on.
pub fn laplace_envelope(params: &BernsteinParams, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let gap = 1.0 - lambda * params.m_const;
    if gap <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(lambda * lambda * params.sigma2 / (2.0 * gap))
}

/// Where a convex function on `[0, ·)` stops being finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLine {
    /// Finite on all of `[0, ∞)`.
    Unbounded,
    /// Finite on `[0, p)`, blowing up at the pole `p`.
    Open(f64),
    /// Finite on `[0, p]`, `+∞` beyond.
    Closed(f64),
}

impl HalfLine {
    /// Domain of [`laplace_envelope`] for the given parameters.
    pub fn for_laplace(params: &BernsteinParams) -> Self {
        if params.m_const > 0.0 {
            HalfLine::Open(1.0 / params.m_const)
        } else {
            HalfLine::Unbounded
        }
    }
}

const GOLDEN_ITERATIONS: usize = 200;
const POLE_SHRINK: f64 = 1e-12;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize a concave function on `[lo, hi]` by golden-section search,
/// returning `(argmax, max)`. Endpoints are included in the comparison.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(h: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let (lo0, hi0) = (lo, hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = h(x1);
    let mut f2 = h(x2);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = h(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = h(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo0, hi0] {
        let v = h(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// One-sided Legendre dual `sup_{λ ∈ domain} (λr − f(λ))` of a convex `f`
/// with `f(0) = 0`, for `r ≥ 0`.
///
/// Returns `+∞` when the objective is unbounded above.
pub fn legendre_dual<F: Fn(f64) -> f64>(f: F, domain: HalfLine, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("dual argument must be >= 0, got {r}")));
    }
    let h = |lambda: f64| {
        let v = f(lambda);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            lambda * r - v
        }
    };
    let hi = match domain {
        HalfLine::Open(p) | HalfLine::Closed(p) if !(p > 0.0) => {
            return Err(Error::domain(format!("domain end must be > 0, got {p}")));
        }
        HalfLine::Open(p) => p * (1.0 - POLE_SHRINK),
        HalfLine::Closed(p) => p,
        HalfLine::Unbounded => {
            let mut hi = 1.0_f64;
            let mut prev = h(hi);
            loop {
                let next = h(2.0 * hi);
                if next <= prev {
                    break 2.0 * hi;
                }
                if hi > 1e150 {
                    return Ok(f64::INFINITY);
                }
                prev = next;
                hi *= 2.0;
            }
        }
    };
    let (_, best) = golden_max(h, 0.0, hi);
    Ok(best.max(0.0))
}
