//! `M`-constants for every route from a functional inequality to a Bernstein
//! bound, Orlicz norms, `K_φ`, the birth-death Poisson constant `K` and the
//! birth-death Lyapunov checks.
//!
//! Functional-inequality constants (`c_P`, `c_LS`, `c_{P,Φ}`, `c_G`, `κ_C`)
//! are inputs with provenance; only birth-death `c_P` is computed in-house.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bound_algebra::{golden_max, legendre_dual, HalfLine};
use crate::chain_models::{log_log_slope, recurrence_diagnostic, BirthDeathSpec, RecurrenceVerdict, StationaryMeasure};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed form known for the model.
    Analytic,
    /// Computed numerically by this crate.
    Computed,
    /// Supplied by the caller.
    Input,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Computed => "computed",
            Provenance::Input => "input",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Bounded,
    Logsobolev,
    Gamma,
    PhiSobolev,
    Lyapunov,
    LyapunovLocal,
    LipschitzPoisson,
    W1i,
    Tc,
    BdLipschitzK,
    MminfGrowth,
    MminfLip,
    /// Optimal constant known in closed form for the model.
    Sharp,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Bounded => "bounded",
            Route::Logsobolev => "logsobolev",
            Route::Gamma => "gamma",
            Route::PhiSobolev => "phi_sobolev",
            Route::Lyapunov => "lyapunov",
            Route::LyapunovLocal => "lyapunov_local",
            Route::LipschitzPoisson => "lipschitz_poisson",
            Route::W1i => "w1i",
            Route::Tc => "tc",
            Route::BdLipschitzK => "bd_lipschitz_K",
            Route::MminfGrowth => "mminf_growth",
            Route::MminfLip => "mminf_lip",
            Route::Sharp => "sharp",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NamedInput {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MConstant {
    pub value: f64,
    pub route: Route,
    pub inputs: BTreeMap<String, NamedInput>,
    /// Minimizing `λ` for optimized routes.
    pub minimizer: Option<f64>,
    /// Set when the value is a limit rather than an attained optimum.
    pub degenerate: bool,
}

impl MConstant {
    fn new(route: Route, value: f64, inputs: &[(&str, f64)]) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::numeric(format!("route {route} produced M = {value}")));
        }
        let inputs = inputs
            .iter()
            .map(|&(k, v)| (k.to_string(), NamedInput { value: v, provenance: Provenance::Input }))
            .collect();
        Ok(Self { value, route, inputs, minimizer: None, degenerate: false })
    }

    /// Override the provenance tag of one input.
    pub fn with_provenance(mut self, name: &str, provenance: Provenance) -> Self {
        if let Some(input) = self.inputs.get_mut(name) {
            input.provenance = provenance;
        }
        self
    }
}

fn nonneg(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(Error::domain(format!("{name} must be >= 0, got {v}")))
    }
}

/// `M = c_P ‖g⁺‖_∞`.
pub fn m_bounded(c_p: f64, sup_g_plus: f64) -> Result<MConstant> {
    let value = nonneg("c_P", c_p)? * nonneg("sup g+", sup_g_plus)?;
    MConstant::new(Route::Bounded, value, &[("c_P", c_p), ("sup_g_plus", sup_g_plus)])
}

/// `M = inf_{λ>0} (c_P Λ(λ) + 2c_LS) / λ`, minimized by multi-start
/// golden-section over a log grid inside `domain`.
pub fn m_logsobolev(c_p: f64, c_ls: f64, lambda_fn: impl Fn(f64) -> f64, domain: HalfLine) -> Result<MConstant> {
    nonneg("c_P", c_p)?;
    nonneg("c_LS", c_ls)?;
    let inputs = [("c_P", c_p), ("c_LS", c_ls)];
    if c_ls == 0.0 {
        let mut m = MConstant::new(Route::Logsobolev, 0.0, &inputs)?;
        m.degenerate = true;
        m.minimizer = Some(0.0);
        return Ok(m);
    }
    let objective = |l: f64| {
        let v = lambda_fn(l);
        if v.is_finite() {
            (c_p * v + 2.0 * c_ls) / l
        } else {
            f64::INFINITY
        }
    };
    let upper = match domain {
        HalfLine::Unbounded => 1e8,
        HalfLine::Open(p) => p * (1.0 - 1e-12),
        HalfLine::Closed(p) => p,
    };
    if !(upper > 0.0) {
        return Err(Error::domain("Laplace functional domain must extend past 0"));
    }
    const GRID: usize = 240;
    let lower = upper * 1e-12;
    let grid: Vec<f64> = (0..=GRID).map(|i| lower * (upper / lower).powf(i as f64 / GRID as f64)).collect();
    let values: Vec<f64> = grid.iter().map(|&l| objective(l)).collect();
    let (best_i, best_v) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    if !best_v.is_finite() {
        return Err(Error::RouteInapplicable("Laplace functional is infinite on the whole search grid".into()));
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(GRID)];
    let (arg, neg) = golden_max(|l| -objective(l), lo, hi);
    let (arg, value) = if -neg < best_v { (arg, -neg) } else { (grid[best_i], best_v) };
    let mut m = MConstant::new(Route::Logsobolev, value, &inputs)?;
    m.minimizer = Some(arg);
    Ok(m)
}

/// `M = 2 c_LS √(c_P ‖Γ(g)‖_∞)`.
pub fn m_gamma(c_p: f64, c_ls: f64, gamma_g_sup: f64) -> Result<MConstant> {
    let value = 2.0 * nonneg("c_LS", c_ls)? * (nonneg("c_P", c_p)? * nonneg("sup Gamma(g)", gamma_g_sup)?).sqrt();
    MConstant::new(Route::Gamma, value, &[("c_P", c_p), ("c_LS", c_ls), ("sup_gamma_g", gamma_g_sup)])
}

/// `M = N_Ψ(g⁺) c_{P,Φ}`.
pub fn m_phi_sobolev(n_psi_g_plus: f64, c_p_phi: f64) -> Result<MConstant> {
    let value = nonneg("N_Psi(g+)", n_psi_g_plus)? * nonneg("c_P_Phi", c_p_phi)?;
    MConstant::new(Route::PhiSobolev, value, &[("N_Psi_g_plus", n_psi_g_plus), ("c_P_Phi", c_p_phi)])
}

/// `σ²(g) ≤ 2 c_{P,Φ} ‖g‖²_{Ψ̃}` with `‖·‖_{Ψ̃}` the Orlicz norm. The factor 2
/// comes from `σ² = 2⟨(−𝓛)^{-1}g, g⟩`.
pub fn sigma2_phi_bound(c_p_phi: f64, norm_g_psi_tilde: f64) -> Result<f64> {
    Ok(2.0 * nonneg("c_P_Phi", c_p_phi)? * nonneg("norm", norm_g_psi_tilde)?.powi(2))
}

/// `M = K_φ(g⁺)(b c_P + 1)`.
pub fn m_lyapunov(k_phi_g_plus: f64, b: f64, c_p: f64) -> Result<MConstant> {
    let value = nonneg("K_phi", k_phi_g_plus)? * (nonneg("b", b)? * nonneg("c_P", c_p)? + 1.0);
    MConstant::new(Route::Lyapunov, value, &[("K_phi_g_plus", k_phi_g_plus), ("b", b), ("c_P", c_p)])
}

/// M/M/∞ growth route: `M = K[(√λ + 1)² + δ]`.
pub fn m_mminf_growth(k: f64, delta: f64, lambda: f64) -> Result<MConstant> {
    let value = nonneg("K", k)? * ((nonneg("lambda", lambda)?.sqrt() + 1.0).powi(2) + nonneg("delta", delta)?);
    MConstant::new(Route::MminfGrowth, value, &[("K", k), ("delta", delta), ("lambda", lambda)])
}

/// `M = K_φ(g⁺)(b κ_C + 1)`.
pub fn m_lyapunov_local(k_phi_g_plus: f64, b: f64, kappa_c: f64) -> Result<MConstant> {
    let value = nonneg("K_phi", k_phi_g_plus)? * (nonneg("b", b)? * nonneg("kappa_C", kappa_c)? + 1.0);
    MConstant::new(Route::LyapunovLocal, value, &[("K_phi_g_plus", k_phi_g_plus), ("b", b), ("kappa_C", kappa_c)])
}

/// `M = 2√(c_P ‖Γ(G)‖_∞)` with `G` the Poisson solution.
pub fn m_lipschitz_poisson(c_p: f64, gamma_big_g_sup: f64) -> Result<MConstant> {
    let value = 2.0 * (nonneg("c_P", c_p)? * nonneg("sup Gamma(G)", gamma_big_g_sup)?).sqrt();
    MConstant::new(Route::LipschitzPoisson, value, &[("c_P", c_p), ("sup_gamma_G", gamma_big_g_sup)])
}

/// M/M/∞ Lipschitz route: `M = ‖g‖_Lip √(2[(√λ + 1)² + λ])`.
pub fn m_mminf_lip(lip_g: f64, lambda: f64) -> Result<MConstant> {
    let l = nonneg("lambda", lambda)?;
    let value = nonneg("Lip(g)", lip_g)? * (2.0 * ((l.sqrt() + 1.0).powi(2) + l)).sqrt();
    MConstant::new(Route::MminfLip, value, &[("lip_g", lip_g), ("lambda", lambda)])
}

/// Birth-death Lipschitz route: `M = 2√(c_P K) ‖g‖_{Lip(ρ)}`.
pub fn m_bd_lipschitz(c_p: f64, k: f64, lip_rho_g: f64) -> Result<MConstant> {
    let value = 2.0 * (nonneg("c_P", c_p)? * nonneg("K", k)?).sqrt() * nonneg("Lip_rho(g)", lip_rho_g)?;
    MConstant::new(Route::BdLipschitzK, value, &[("c_P", c_p), ("K", k), ("lip_rho_g", lip_rho_g)])
}

/// `M = ‖g‖_{Lip(d)} √(2 c_P c_G)`.
pub fn m_w1i(lip_g: f64, c_p: f64, c_g: f64) -> Result<MConstant> {
    let value = nonneg("Lip(g)", lip_g)? * (2.0 * nonneg("c_P", c_p)? * nonneg("c_G", c_g)?).sqrt();
    MConstant::new(Route::W1i, value, &[("lip_g", lip_g), ("c_P", c_p), ("c_G", c_g)])
}

/// `M = μ(g*) c_P + c_P α^{-1}(1/c_P)`, where `α` is the transport rate.
pub fn m_tc(mu_g_star: f64, c_p: f64, alpha_inv_at_inv_cp: f64) -> Result<MConstant> {
    if mu_g_star < 0.0 {
        return Err(Error::Precondition(format!(
            "mu(g*) = {mu_g_star} < 0 is inconsistent: g* >= g forces mu(g*) >= mu(g) = 0"
        )));
    }
    let c = nonneg("c_P", c_p)?;
    let value = mu_g_star * c + c * nonneg("alpha^-1(1/c_P)", alpha_inv_at_inv_cp)?;
    MConstant::new(Route::Tc, value, &[("mu_g_star", mu_g_star), ("c_P", c_p), ("alpha_inv", alpha_inv_at_inv_cp)])
}

/// Optimal constant known in closed form for the model.
pub fn m_sharp(value: f64) -> Result<MConstant> {
    let m = MConstant::new(Route::Sharp, nonneg("M", value)?, &[("M", value)])?;
    Ok(m.with_provenance("M", Provenance::Analytic))
}

/// `g*(y) = max_x (g(x) − c(x, y))` on a finite state space.
pub fn sup_convolution(g: &[f64], cost: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..g.len())
        .map(|y| g.iter().enumerate().map(|(x, gx)| gx - cost(x, y)).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// `K_φ(g) = sup g⁺/φ` over a finite probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KPhi {
    /// `sup g⁺/φ`.
    pub value: f64,
    /// `sup |g|/φ`.
    pub abs_value: f64,
    /// The supremum sits on the last probed point, so the true value is a
    /// limit that the probe may understate.
    pub at_probe_edge: bool,
}

pub fn k_phi(g: &[f64], phi: &[f64]) -> Result<KPhi> {
    if g.len() != phi.len() || g.is_empty() {
        return Err(Error::domain("g and phi must be nonempty and of equal length"));
    }
    let mut value = 0.0f64;
    let mut abs_value = 0.0f64;
    let mut arg = 0;
    for (i, (&gi, &pi)) in g.iter().zip(phi).enumerate() {
        if !(pi > 0.0) {
            return Err(Error::domain(format!("phi must be positive, got {pi} at {i}")));
        }
        let r = gi.max(0.0) / pi;
        if r >= value && r > 0.0 {
            value = r;
            arg = i;
        }
        abs_value = abs_value.max(gi.abs() / pi);
    }
    Ok(KPhi { value, abs_value, at_probe_edge: value > 0.0 && arg == g.len() - 1 })
}

// ---------------------------------------------------------------------------
// Orlicz norms

/// Young functions with known conjugates, plus an arbitrary numeric one.
#[derive(Clone)]
pub enum YoungFn {
    /// `x`.
    Linear,
    /// `0` on `[0,1]`, `+∞` beyond: the conjugate of `Linear`.
    Indicator,
    /// `xᵖ`, `p > 1`.
    Power(f64),
    /// `c·xᵖ`, `p > 1`.
    ScaledPower { c: f64, p: f64 },
    /// `eˣ − 1`.
    ExpMinusOne,
    /// `y log y − y + 1` for `y ≥ 1`, else 0: the conjugate of `ExpMinusOne`.
    EntropyConjugate,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for YoungFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YoungFn::Linear => write!(f, "x"),
            YoungFn::Indicator => write!(f, "inf*1(x>1)"),
            YoungFn::Power(p) => write!(f, "x^{p}"),
            YoungFn::ScaledPower { c, p } => write!(f, "{c}*x^{p}"),
            YoungFn::ExpMinusOne => write!(f, "exp(x)-1"),
            YoungFn::EntropyConjugate => write!(f, "x log x - x + 1"),
            YoungFn::Custom(_) => write!(f, "custom"),
        }
    }
}

impl YoungFn {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            YoungFn::Linear => x,
            YoungFn::Indicator => {
                if x <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            YoungFn::Power(p) => x.powf(*p),
            YoungFn::ScaledPower { c, p } => c * x.powf(*p),
            YoungFn::ExpMinusOne => x.exp_m1(),
            YoungFn::EntropyConjugate => {
                if x <= 1.0 {
                    0.0
                } else {
                    x * x.ln() - x + 1.0
                }
            }
            YoungFn::Custom(f) => f(x),
        }
    }

    /// `Ψ(y) = sup_{x≥0}(xy − Φ(x))`, closed form when known.
    pub fn conjugate(&self) -> YoungFn {
        match self {
            YoungFn::Linear => YoungFn::Indicator,
            YoungFn::Indicator => YoungFn::Linear,
            YoungFn::Power(p) => {
                let q = p / (p - 1.0);
                YoungFn::ScaledPower { c: (p - 1.0) * p.powf(-q), p: q }
            }
            YoungFn::ScaledPower { c, p } => {
                let q = p / (p - 1.0);
                YoungFn::ScaledPower { c: (p - 1.0) * (c * p).powf(1.0 - q) / p, p: q }
            }
            YoungFn::ExpMinusOne => YoungFn::EntropyConjugate,
            YoungFn::EntropyConjugate => YoungFn::ExpMinusOne,
            YoungFn::Custom(f) => {
                let f = f.clone();
                YoungFn::Custom(Arc::new(move |y| {
                    let g = f.clone();
                    legendre_dual(move |x| g(x), HalfLine::Unbounded, y.max(0.0)).unwrap_or(f64::INFINITY)
                }))
            }
        }
    }

    /// `x ↦ Φ(x²)`.
    pub fn squared_argument(&self) -> YoungFn {
        match self {
            YoungFn::Linear => YoungFn::Power(2.0),
            YoungFn::Indicator => YoungFn::Indicator,
            YoungFn::Power(p) => YoungFn::Power(2.0 * p),
            YoungFn::ScaledPower { c, p } => YoungFn::ScaledPower { c: *c, p: 2.0 * p },
            other => {
                let inner = other.clone();
                YoungFn::Custom(Arc::new(move |x| inner.eval(x * x)))
            }
        }
    }
}

/// `Φ` together with `Ψ = Φ*`, `Φ̃(x) = Φ(x²)` and `Ψ̃ = Φ̃*`.
#[derive(Debug, Clone)]
pub struct OrliczSpec {
    pub phi: YoungFn,
    pub psi: YoungFn,
    pub phi_tilde: YoungFn,
    pub psi_tilde: YoungFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrliczSide {
    Phi,
    Psi,
    PhiTilde,
    PsiTilde,
}

impl OrliczSpec {
    pub fn new(phi: YoungFn) -> Self {
        let psi = phi.conjugate();
        let phi_tilde = phi.squared_argument();
        let psi_tilde = phi_tilde.conjugate();
        Self { phi, psi, phi_tilde, psi_tilde }
    }

    pub fn linear() -> Self {
        Self::new(YoungFn::Linear)
    }

    pub fn square() -> Self {
        Self::new(YoungFn::Power(2.0))
    }

    pub fn exponential() -> Self {
        Self::new(YoungFn::ExpMinusOne)
    }

    pub fn side(&self, side: OrliczSide) -> &YoungFn {
        match side {
            OrliczSide::Phi => &self.phi,
            OrliczSide::Psi => &self.psi,
            OrliczSide::PhiTilde => &self.phi_tilde,
            OrliczSide::PsiTilde => &self.psi_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeNorm {
    pub value: f64,
    /// Set when the bracket could not be closed and `+∞` is reported.
    pub bracket_failed: bool,
}

const GAUGE_EXPANSIONS: usize = 400;

/// `N_Φ(g) = inf{c > 0 : Σ w_i Φ(|g_i|/c) ≤ 1}` by bisection on `c`.
pub fn orlicz_gauge_norm(young: &YoungFn, values: &[f64], weights: &[f64]) -> Result<GaugeNorm> {
    if values.len() != weights.len() {
        return Err(Error::domain("values and weights must have equal length"));
    }
    let support: Vec<(f64, f64)> =
        values.iter().zip(weights).filter(|(v, w)| **w > 0.0 && **v != 0.0).map(|(v, w)| (v.abs(), *w)).collect();
    if support.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::domain("observable must be finite on the support"));
    }
    if support.is_empty() {
        return Ok(GaugeNorm { value: 0.0, bracket_failed: false });
    }
    if let YoungFn::Indicator = young {
        let sup = support.iter().map(|(v, _)| *v).fold(0.0, f64::max);
        return Ok(GaugeNorm { value: sup, bracket_failed: false });
    }
    let integral = |c: f64| support.iter().map(|(v, w)| w * young.eval(v / c)).sum::<f64>();
    let ok = |c: f64| integral(c) <= 1.0;
    let scale = support.iter().map(|(v, _)| *v).fold(0.0, f64::max);
    let mut hi = scale;
    let mut expansions = 0;
    while !ok(hi) {
        hi *= 2.0;
        expansions += 1;
        if expansions > GAUGE_EXPANSIONS || !hi.is_finite() {
            return Ok(GaugeNorm { value: f64::INFINITY, bracket_failed: true });
        }
    }
    let mut lo = hi;
    let mut shrinks = 0;
    while ok(lo) {
        lo *= 0.5;
        shrinks += 1;
        if shrinks > GAUGE_EXPANSIONS || lo == 0.0 {
            return Ok(GaugeNorm { value: 0.0, bracket_failed: false });
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GaugeNorm { value: hi, bracket_failed: false })
}

/// Orlicz norm `‖g‖_Φ = sup{∫ g u dμ : N_Ψ(u) ≤ 1}` via the Amemiya formula
/// `inf_{k>0} (1 + Σ w_i Φ(k|g_i|)) / k`.
pub fn orlicz_norm(young: &YoungFn, values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::domain("values and weights must have equal length"));
    }
    let scale = values.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let objective = |log_k: f64| {
        let k = log_k.exp();
        let s: f64 = values.iter().zip(weights).map(|(v, w)| if *w > 0.0 { w * young.eval(k * v.abs()) } else { 0.0 }).sum();
        (1.0 + s) / k
    };
    // grid on log k around 1/scale, then golden refinement
    let centre = -scale.ln();
    let grid: Vec<f64> = (0..=400).map(|i| centre - 40.0 + 0.2 * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| objective(x)).collect();
    let (bi, bv) = vals.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    if !bv.is_finite() {
        return Ok(f64::INFINITY);
    }
    let lo = grid[bi.saturating_sub(1)];
    let hi = grid[(bi + 1).min(grid.len() - 1)];
    let (_, neg) = golden_max(|x| -objective(x), lo, hi);
    Ok((-neg).min(bv))
}

// ---------------------------------------------------------------------------
// Birth-death Poisson constant K

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KBirthDeath {
    pub k: f64,
    pub argmax: usize,
    pub truncation: usize,
    /// Supremum attained in the top tenth of the probe: the value is likely
    /// still growing with `N`.
    pub appears_to_diverge: bool,
}

/// `K = ½ sup_n (1_{n≥1} T_n² / (a_n μ_n²) + T_{n+1}² / (b_n μ_n²))` with
/// `T_n = Σ_{i≥n} μ_i (ρ(i) − μ(ρ))`.
///
/// Works with `R_n = T_n / μ_n`, accumulated from the head below the mode of
/// `μ` and from the tail above it, so nothing underflows.
pub fn k_birth_death(spec: &BirthDeathSpec, mu: &StationaryMeasure, rho: &[f64]) -> Result<KBirthDeath> {
    let n = mu.truncation;
    if rho.len() != n + 1 {
        return Err(Error::domain(format!("rho needs {} values, got {}", n + 1, rho.len())));
    }
    if rho.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("rho must be strictly increasing"));
    }
    let mean = mu.expect(rho);
    let h: Vec<f64> = rho.iter().map(|r| r - mean).collect();
    let mode = mu.mode();
    let mut r = vec![0.0; n + 2];
    // head: R_m = −(a_m / b_{m−1}) (h_{m−1} + H'_{m−1}) with H'_m = −R_m
    let mut head = 0.0;
    for m in 1..=mode.min(n) {
        head = spec.death(m) / spec.birth(m - 1) * (h[m - 1] + head);
        r[m] = -head;
    }
    r[0] = 0.0;
    let mut tail = h[n];
    r[n] = tail;
    for m in (mode.max(1)..n).rev() {
        tail = h[m] + spec.birth(m) / spec.death(m + 1) * tail;
        r[m] = tail;
    }
    let mut best = (0.0f64, 0usize);
    for m in 0..=n {
        let mut term = 0.0;
        if m >= 1 {
            term += r[m] * r[m] / spec.death(m);
        }
        if m < n {
            let ratio = spec.birth(m) / spec.death(m + 1);
            term += ratio * ratio * r[m + 1] * r[m + 1] / spec.birth(m);
        }
        let term = 0.5 * term;
        if term > best.0 {
            best = (term, m);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::numeric("K overflowed"));
    }
    Ok(KBirthDeath { k: best.0, argmax: best.1, truncation: n, appears_to_diverge: best.1 * 10 >= 9 * n })
}

// ---------------------------------------------------------------------------
// Birth-death Lyapunov certificates

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BdLyapunovCertificate {
    pub pass: bool,
    pub kappa: f64,
    pub n_from: usize,
    pub n_probe: usize,
    /// `min (a_n − κ b_n − φ₀(n))` over `[n_from, n_probe]`.
    pub margin: f64,
    pub first_violation: Option<usize>,
    /// `1 − 1/κ`, so that `φ = (1 − 1/κ) φ₀`.
    pub phi_scale: f64,
    pub b: f64,
    /// `φ` degenerates to 0 (κ close to 1).
    pub degenerate: bool,
}

/// Geometric Lyapunov check with `U(n) = κⁿ`, for which
/// `−𝓛U/U(n) = (1 − 1/κ)(a_n − κ b_n)` (with `a_0 = 0`).
pub fn check_lyapunov_bd(
    spec: &BirthDeathSpec,
    phi0: impl Fn(usize) -> f64,
    kappa: f64,
    n_from: usize,
    n_probe: usize,
) -> Result<BdLyapunovCertificate> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be > 1, got {kappa}")));
    }
    if n_probe < n_from {
        return Err(Error::domain("N_probe must be >= N_from"));
    }
    let scale = 1.0 - 1.0 / kappa;
    let mut margin = f64::INFINITY;
    let mut first_violation = None;
    for n in n_from..=n_probe {
        let slack = spec.death(n) - kappa * spec.birth(n) - phi0(n);
        if slack < 0.0 && first_violation.is_none() {
            first_violation = Some(n);
        }
        margin = margin.min(slack);
    }
    let b = (0..n_from)
        .map(|n| scale * (phi0(n) + kappa * spec.birth(n) - spec.death(n)).max(0.0))
        .fold(0.0, f64::max);
    Ok(BdLyapunovCertificate {
        pass: first_violation.is_none(),
        kappa,
        n_from,
        n_probe,
        margin,
        first_violation,
        phi_scale: scale,
        b,
        degenerate: scale < 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgeomCertificate {
    pub pass: bool,
    pub m: f64,
    pub delta: f64,
    /// Smallest `N` with `c_n = a_n − b_n > 0` on `[N, n_probe]`.
    pub c_positive_from: Option<usize>,
    /// Slope of `log(n^m π_n)` against `log n` on the last probe decade.
    pub moment_tail_exponent: f64,
    pub moment_ok: bool,
    /// Smallest `N` with `−𝓛U/U ≥ φ` on `[N, n_probe]`, `U = (1+n)^m`.
    pub drift_from: Option<usize>,
    /// `max_{n < drift_from} (φ(n) + 𝓛U/U(n))⁺`.
    pub b: f64,
    pub recurrence: RecurrenceVerdict,
    pub n_probe: usize,
}

/// Required margin below −1 for the moment tail exponent.
const MOMENT_MARGIN: f64 = 0.05;

/// Sub-geometric check with `U(n) = (1+n)^m` and
/// `φ(n) = (m − δ) c_n / (1+n)`, `δ = m/2`.
pub fn check_lyapunov_bd_subgeom(spec: &BirthDeathSpec, m: f64, n_probe: usize) -> Result<SubgeomCertificate> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain(format!("moment order m must be > 0, got {m}")));
    }
    if n_probe < 20 {
        return Err(Error::domain("N_probe must be >= 20"));
    }
    spec.validate_up_to(n_probe + 1)?;
    let delta = 0.5 * m;
    let c: Vec<f64> = (0..=n_probe).map(|n| spec.death(n) - spec.birth(n)).collect();
    let c_positive_from = (0..=n_probe).rev().take_while(|&n| c[n] > 0.0).last();

    let mut log_pi = vec![0.0];
    for k in 1..=n_probe {
        log_pi.push(log_pi[k - 1] + spec.birth(k - 1).ln() - spec.death(k).ln());
    }
    let lo = (n_probe / 10).max(1);
    let ns: Vec<usize> = (lo..=n_probe).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| m * (n as f64).ln() + log_pi[n]).collect();
    let moment_tail_exponent = log_log_slope(&ns, &ys);
    let moment_ok = moment_tail_exponent < -1.0 - MOMENT_MARGIN;

    let u = |n: usize| (1.0 + n as f64).powf(m);
    let drift = |n: usize| -> f64 {
        // −𝓛U/U
        let up = spec.birth(n) * (u(n + 1) / u(n) - 1.0);
        let down = if n > 0 { spec.death(n) * (u(n - 1) / u(n) - 1.0) } else { 0.0 };
        -(up + down)
    };
    let phi = |n: usize| (m - delta) * c[n] / (1.0 + n as f64);
    let holds: Vec<bool> = (0..=n_probe).map(|n| drift(n) >= phi(n)).collect();
    let drift_from = (0..=n_probe).rev().take_while(|&n| holds[n]).last();
    let b = match drift_from {
        Some(from) => (0..from).map(|n| (phi(n) - drift(n)).max(0.0)).fold(0.0, f64::max),
        None => f64::INFINITY,
    };

    let recurrence = recurrence_diagnostic(spec, n_probe)?.verdict;
    let tail_start = n_probe / 2;
    let pass = c_positive_from.is_some_and(|n| n <= tail_start)
        && drift_from.is_some_and(|n| n <= tail_start)
        && moment_ok
        && recurrence != RecurrenceVerdict::LikelyNot;

    Ok(SubgeomCertificate {
        pass,
        m,
        delta,
        c_positive_from,
        moment_tail_exponent,
        moment_ok,
        drift_from,
        b,
        recurrence,
        n_probe,
    })
}
