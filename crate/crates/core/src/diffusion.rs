//! Diffusions: the Ornstein-Uhlenbeck process in closed form and radial
//! potential diffusions `𝓛 = Δ − ∇V·∇` on `ℝ^d`, with grid Lyapunov
//! certificates.
//!
//! All built-in potentials are radial, `V(x) = v(|x|)`, so that
//! `∇V = v′(r) x/r` and `ΔV = v″(r) + (d−1) v′(r)/r`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::Provenance;
use crate::error::{Error, Result};
use crate::spectral::SpectralConstants;

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck: 𝓛f = f″ − x f′/θ, μ = N(0, θ)

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OUSpec {
    pub theta: f64,
}

impl OUSpec {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Spec(format!("OU theta must be > 0, got {theta}")));
        }
        Ok(Self { theta })
    }
}

/// Exact transition: mean `x e^{−dt/θ}`, variance `θ(1 − e^{−2dt/θ})`.
pub fn ou_transition_sample<R: Rng + ?Sized>(x: f64, dt: f64, theta: f64, rng: &mut R) -> f64 {
    let decay = (-dt / theta).exp();
    let sd = (theta * -(-2.0 * dt / theta).exp_m1()).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    x * decay + sd * z
}

/// `c_P = c_LS = θ`.
pub fn ou_constants(theta: f64) -> Result<SpectralConstants> {
    OUSpec::new(theta)?;
    Ok(SpectralConstants::from_gap(1.0 / theta, Provenance::Analytic)?.with_log_sobolev(theta, Provenance::Analytic))
}

/// `Λ(λ g₀)` for `g₀ = x² − θ`: `(1 − √(1 − 4θ²λ))² / (4θ)` up to
/// `λ₀ = 1/(4θ²)`, `+∞` beyond.
pub fn ou_lambda_quadratic(lambda: f64, theta: f64) -> f64 {
    let arg = 1.0 - 4.0 * theta * theta * lambda;
    if arg < 0.0 {
        return f64::INFINITY;
    }
    let s = 1.0 - arg.sqrt();
    s * s / (4.0 * theta)
}

/// `σ²(g₀) = 2θ³`.
pub fn ou_sigma2(theta: f64) -> f64 {
    2.0 * theta.powi(3)
}

/// Sharp scale constant `M = 4θ²` for `g₀`.
pub fn ou_sharp_m(theta: f64) -> f64 {
    4.0 * theta * theta
}

/// Value with first and second derivative, for exact differentiation of
/// closed-form test functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn variable(x: f64) -> Self {
        Self { v: x, d1: 1.0, d2: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { v: c, d1: 0.0, d2: 0.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d1: e * self.d1, d2: e * (self.d2 + self.d1 * self.d1) }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d1: self.d1 * o.v + self.v * o.d1, d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2 }
    }
}

/// Largest relative residual of `[𝓛 + ((a − a²)/θ²) g₀] U = (a²/θ) U` for
/// `U = exp(a x²/(2θ))` over the grid.
pub fn ou_eigen_residual(a: f64, theta: f64, grid: &[f64]) -> Result<f64> {
    if !(a < 0.5) {
        return Err(Error::domain(format!("a must be < 1/2, got {a}")));
    }
    OUSpec::new(theta)?;
    let potential = (a - a * a) / (theta * theta);
    let eigen = a * a / theta;
    Ok(grid
        .iter()
        .map(|&x| {
            let xj = Jet::variable(x);
            let u = (xj * xj).scale(a / (2.0 * theta)).exp();
            let g0 = x * x - theta;
            let lhs = u.d2 - x * u.d1 / theta + potential * g0 * u.v - eigen * u.v;
            (lhs / u.v).abs()
        })
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Radial potentials

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `|x|^β` for `|x| > 1`, with an even C² quartic patch inside the unit
    /// ball.
    #[serde(alias = "subexp", alias = "subexponential")]
    Power { beta: f64 },
    /// `((d + β)/2) log(1 + |x|²)`.
    Cauchy { beta: f64 },
    /// `|x|²/(2θ)`.
    Quadratic { theta: f64 },
    /// Tabulated `v`, `v′` and optionally `v″` on increasing radii, linearly
    /// interpolated and held constant past the ends.
    Table {
        r: Vec<f64>,
        v: Vec<f64>,
        dv: Vec<f64>,
        #[serde(default)]
        d2v: Option<Vec<f64>>,
    },
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&xi| xi >= x) {
        Some(0) => ys[0],
        None => *ys.last().unwrap(),
        Some(i) => {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialDiffusion {
    pub profile: RadialProfile,
    pub dim: usize,
}

impl PotentialDiffusion {
    pub fn new(profile: RadialProfile, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Spec("dimension must be >= 1".into()));
        }
        match &profile {
            RadialProfile::Power { beta } if !(*beta > 0.0) => {
                return Err(Error::Spec(format!("power potential needs beta > 0, got {beta}")))
            }
            RadialProfile::Cauchy { beta } if !(*beta > 0.0) => {
                return Err(Error::Spec(format!("Cauchy potential needs beta > 0, got {beta}")))
            }
            RadialProfile::Quadratic { theta } if !(*theta > 0.0) => {
                return Err(Error::Spec(format!("quadratic potential needs theta > 0, got {theta}")))
            }
            RadialProfile::Table { r, v, dv, d2v } => {
                let n = r.len();
                if n < 2 || v.len() != n || dv.len() != n || d2v.as_ref().is_some_and(|t| t.len() != n) {
                    return Err(Error::Spec("potential table columns must share a length >= 2".into()));
                }
                if r.windows(2).any(|w| !(w[1] > w[0])) || r[0] < 0.0 {
                    return Err(Error::Spec("potential table radii must be increasing and >= 0".into()));
                }
            }
            _ => {}
        }
        Ok(Self { profile, dim })
    }

    pub fn power(beta: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Power { beta }, dim)
    }

    /// `|x|^β` with `β ∈ (0, 1)`.
    pub fn subexponential(beta: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Spec(format!("sub-exponential potential needs beta in (0, 1), got {beta}")));
        }
        Self::power(beta, dim)
    }

    pub fn cauchy(beta: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Cauchy { beta }, dim)
    }

    pub fn quadratic(theta: f64, dim: usize) -> Result<Self> {
        Self::new(RadialProfile::Quadratic { theta }, dim)
    }

    fn patch(beta: f64) -> (f64, f64, f64) {
        let c4 = beta * (beta - 2.0) / 8.0;
        let c2 = beta * (4.0 - beta) / 4.0;
        (1.0 - c2 - c4, c2, c4)
    }

    /// `v(r)`.
    pub fn v_radial(&self, r: f64) -> f64 {
        match &self.profile {
            RadialProfile::Power { beta } => {
                if r > 1.0 {
                    r.powf(*beta)
                } else {
                    let (c0, c2, c4) = Self::patch(*beta);
                    c0 + c2 * r * r + c4 * r.powi(4)
                }
            }
            RadialProfile::Cauchy { beta } => 0.5 * (self.dim as f64 + beta) * (r * r).ln_1p(),
            RadialProfile::Quadratic { theta } => r * r / (2.0 * theta),
            RadialProfile::Table { r: rs, v, .. } => interp(rs, v, r),
        }
    }

    /// `v′(r)`.
    pub fn dv_radial(&self, r: f64) -> f64 {
        match &self.profile {
            RadialProfile::Power { beta } => {
                if r > 1.0 {
                    beta * r.powf(beta - 1.0)
                } else {
                    let (_, c2, c4) = Self::patch(*beta);
                    2.0 * c2 * r + 4.0 * c4 * r.powi(3)
                }
            }
            RadialProfile::Cauchy { beta } => (self.dim as f64 + beta) * r / (1.0 + r * r),
            RadialProfile::Quadratic { theta } => r / theta,
            RadialProfile::Table { r: rs, dv, .. } => interp(rs, dv, r),
        }
    }

    /// `v′(r)/r`, with its limit at `r = 0`.
    fn dv_over_r(&self, r: f64) -> f64 {
        match &self.profile {
            RadialProfile::Power { beta } if r <= 1.0 => {
                let (_, c2, c4) = Self::patch(*beta);
                2.0 * c2 + 4.0 * c4 * r * r
            }
            RadialProfile::Cauchy { beta } => (self.dim as f64 + beta) / (1.0 + r * r),
            RadialProfile::Quadratic { theta } => 1.0 / theta,
            _ if r == 0.0 => 0.0,
            _ => self.dv_radial(r) / r,
        }
    }

    /// `v″(r)`, if available.
    pub fn d2v_radial(&self, r: f64) -> Option<f64> {
        match &self.profile {
            RadialProfile::Power { beta } => Some(if r > 1.0 {
                beta * (beta - 1.0) * r.powf(beta - 2.0)
            } else {
                let (_, c2, c4) = Self::patch(*beta);
                2.0 * c2 + 12.0 * c4 * r * r
            }),
            RadialProfile::Cauchy { beta } => {
                let s = 1.0 + r * r;
                Some((self.dim as f64 + beta) * (1.0 - r * r) / (s * s))
            }
            RadialProfile::Quadratic { theta } => Some(1.0 / theta),
            RadialProfile::Table { r: rs, d2v, .. } => d2v.as_ref().map(|t| interp(rs, t, r)),
        }
    }

    /// `ΔV` at radius `r`.
    pub fn laplacian_radial(&self, r: f64) -> Option<f64> {
        self.d2v_radial(r).map(|d2| d2 + (self.dim as f64 - 1.0) * self.dv_over_r(r))
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.v_radial(norm(x))
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let s = self.dv_over_r(norm(x));
        x.iter().map(|xi| s * xi).collect()
    }

    pub fn laplacian(&self, x: &[f64]) -> Result<f64> {
        self.laplacian_radial(norm(x))
            .ok_or_else(|| Error::Capability("potential has no Laplacian (table without d2v)".into()))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One step `x − ∇V(x) dt + √(2dt) ξ`.
pub fn euler_maruyama_step<R: Rng + ?Sized>(
    x: &[f64],
    dt: f64,
    diff: &PotentialDiffusion,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let grad = diff.grad(x);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Integration { location: x.to_vec(), reason: "non-finite gradient".into() });
    }
    let scale = (2.0 * dt).sqrt();
    Ok(x
        .iter()
        .zip(&grad)
        .map(|(xi, gi)| {
            let z: f64 = rng.sample(StandardNormal);
            xi - gi * dt + scale * z
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Radial quadrature and stationary sampling

const QUAD_POINTS: usize = 40_000;

/// Nodes `r(t) = t/(1 − t)` on `t ∈ [0, 1)` with Simpson weights including
/// the Jacobian and the radial density `r^{d−1} e^{−V(r)}` (unnormalized).
fn radial_nodes(diff: &PotentialDiffusion) -> (Vec<f64>, Vec<f64>) {
    let n = QUAD_POINTS;
    let h = 1.0 / n as f64;
    let v0 = diff.v_radial(0.0);
    let mut rs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * h;
        let r = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        let dens = r.powi(diff.dim as i32 - 1) * (v0 - diff.v_radial(r)).exp();
        let simpson = if i == 0 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        rs.push(r);
        ws.push(simpson * h / 3.0 * jac * dens);
    }
    (rs, ws)
}

/// `∫ f(|x|) μ(dx)` for a radial potential.
pub fn radial_expectation(diff: &PotentialDiffusion, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (rs, ws) = radial_nodes(diff);
    let z: f64 = ws.iter().sum();
    let num: f64 = rs.iter().zip(&ws).map(|(r, w)| if *w > 0.0 { w * f(*r) } else { 0.0 }).sum();
    if !(z > 0.0 && z.is_finite()) || !num.is_finite() {
        return Err(Error::numeric("radial quadrature did not converge"));
    }
    Ok(num / z)
}

/// Inverse-CDF sampler for `μ = e^{−V} dx / Z` of a radial potential.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    dim: usize,
    radii: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialSampler {
    pub fn new(diff: &PotentialDiffusion) -> Result<Self> {
        let (rs, ws) = radial_nodes(diff);
        // trapezoid-style cumulative mass on the node sequence
        let mut cdf = Vec::with_capacity(rs.len());
        let mut acc = 0.0;
        for w in &ws {
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::numeric("stationary radial law is not normalizable"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { dim: diff.dim, radii: rs, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).min(self.radii.len() - 1);
        let r = if i == 0 {
            self.radii[0]
        } else {
            let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
            let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
            self.radii[i - 1] + t * (self.radii[i] - self.radii[i - 1])
        };
        let mut dir: Vec<f64> = (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&dir);
        if len > 0.0 {
            dir.iter_mut().for_each(|v| *v *= r / len);
        } else {
            dir[0] = r;
        }
        if self.dim == 1 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            return vec![sign * r];
        }
        dir
    }
}

// ---------------------------------------------------------------------------
// Lyapunov grid certificates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovCondition {
    Kustr,
    Simpl,
    Kustr2,
    Bd,
}

/// Radii `R ≤ r ≤ R_max` on which a certificate is checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub radii: Vec<f64>,
}

impl RadialGrid {
    pub fn log_spaced(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) || n < 2 {
            return Err(Error::domain("grid needs 0 < R < R_max and at least two points"));
        }
        let ratio = (r_max / r_min).ln();
        Ok(Self { radii: (0..n).map(|i| r_min * (ratio * i as f64 / (n - 1) as f64).exp()).collect() })
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub condition: LyapunovCondition,
    pub pass: bool,
    pub params: BTreeMap<String, f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub grid_points: usize,
    /// Minimum slack observed on the grid.
    pub margin: f64,
    /// Best constant `c` for `kustr`/`simpl`.
    pub c: Option<f64>,
    /// Log-log slope of the ratio over the outer decade of the grid; a
    /// clearly negative slope means the inequality degrades at infinity.
    pub tail_slope: f64,
    /// `φ = phi_scale · φ̃` for `kustr2`.
    pub phi_scale: Option<f64>,
    /// `b` for `kustr2`: the deficit inside `B(0, R)`.
    pub b: Option<f64>,
    /// Tail exponent of `r^{d−1} e^{(a−1)V(r)}` for `kustr2` (< −1 means
    /// integrable).
    pub integrability_exponent: Option<f64>,
    pub notes: Vec<String>,
}

/// Minimal tail slope of the certified ratio; below this the ratio is judged
/// to decay to zero.
const TAIL_SLOPE_FLOOR: f64 = -0.25;

fn outer_decade_slope(radii: &[f64], values: &[f64]) -> f64 {
    let r_max = *radii.last().unwrap();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .filter(|(r, v)| **r >= r_max / 10.0 && **v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn check_a(a: f64) -> Result<()> {
    if !(a < 1.0) {
        return Err(Error::Precondition(format!("a must be < 1, got {a}")));
    }
    Ok(())
}

fn lyap_lhs(diff: &PotentialDiffusion, a: f64, r: f64) -> Result<f64> {
    let lap = diff
        .laplacian_radial(r)
        .ok_or_else(|| Error::Capability("condition needs the Laplacian of V".into()))?;
    let dv = diff.dv_radial(r);
    Ok((1.0 - a) * dv * dv - lap)
}

fn best_c_certificate(
    condition: LyapunovCondition,
    grid: &RadialGrid,
    lhs: &[f64],
    gamma: f64,
    params: BTreeMap<String, f64>,
) -> LyapunovCertificate {
    let ratio: Vec<f64> = grid.radii.iter().zip(lhs).map(|(r, l)| l / (1.0 + r.powf(gamma))).collect();
    let c = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_slope = outer_decade_slope(&grid.radii, &ratio);
    let mut notes = vec!["checked on a finite radial grid; no extrapolation beyond R_max".to_string()];
    let decays = tail_slope < TAIL_SLOPE_FLOOR;
    if decays {
        notes.push(format!("ratio decays toward 0 at large |x| (log-log slope {tail_slope:.3})"));
    }
    LyapunovCertificate {
        condition,
        pass: c > 0.0 && !decays,
        params,
        r_min: grid.r_min(),
        r_max: grid.r_max(),
        grid_points: grid.radii.len(),
        margin: c,
        c: Some(c.max(0.0)),
        tail_slope,
        phi_scale: None,
        b: None,
        integrability_exponent: None,
        notes,
    }
}

/// `(1 − a)|∇V|² − ΔV ≥ c(1 + |x|^γ)` on the grid; reports the best `c`.
pub fn check_lyapunov_kustr(diff: &PotentialDiffusion, a: f64, gamma: f64, grid: &RadialGrid) -> Result<LyapunovCertificate> {
    check_a(a)?;
    let lhs = grid.radii.iter().map(|&r| lyap_lhs(diff, a, r)).collect::<Result<Vec<_>>>()?;
    let params = BTreeMap::from([("a".to_string(), a), ("gamma".to_string(), gamma)]);
    Ok(best_c_certificate(LyapunovCondition::Kustr, grid, &lhs, gamma, params))
}

/// `|x|^{γ/2} (x/|x|)·∇V(x) ≥ c(1 + |x|^γ)` on the grid.
pub fn check_lyapunov_simpl(diff: &PotentialDiffusion, gamma: f64, grid: &RadialGrid) -> Result<LyapunovCertificate> {
    let lhs: Vec<f64> = grid.radii.iter().map(|&r| r.powf(gamma / 2.0) * diff.dv_radial(r)).collect();
    let params = BTreeMap::from([("gamma".to_string(), gamma)]);
    Ok(best_c_certificate(LyapunovCondition::Simpl, grid, &lhs, gamma, params))
}

/// `(1 − a)|∇V|² − ΔV ≥ φ̃` on `R ≤ |x| ≤ R_max`, giving the weak Lyapunov
/// data `U = e^{aV}`, `φ = aφ̃`, `C = B(0, R)` and `b`.
pub fn check_lyapunov_kustr2(
    diff: &PotentialDiffusion,
    a: f64,
    phi_tilde: impl Fn(f64) -> f64,
    grid: &RadialGrid,
) -> Result<LyapunovCertificate> {
    check_a(a)?;
    let mut margin = f64::INFINITY;
    let mut ratio = Vec::with_capacity(grid.radii.len());
    for &r in &grid.radii {
        let lhs = lyap_lhs(diff, a, r)?;
        let pt = phi_tilde(r);
        if !(pt > 0.0) || !pt.is_finite() {
            return Err(Error::domain(format!("phi_tilde must be positive and finite, got {pt} at r = {r}")));
        }
        margin = margin.min(lhs - pt);
        ratio.push(lhs / pt);
    }
    let tail_slope = outer_decade_slope(&grid.radii, &ratio);

    // deficit inside the ball: −𝓛U/U = a · lhs for U = e^{aV}
    let r_in = grid.r_min();
    let inner: Vec<f64> = (0..=200).map(|i| r_in * i as f64 / 200.0).collect();
    let mut b = 0.0f64;
    for &r in &inner {
        b = b.max(a * (phi_tilde(r) - lyap_lhs(diff, a, r)?).max(0.0));
    }

    // integrability of e^{(a−1)V}: radial tail exponent on the outer decade
    let density: Vec<f64> = grid
        .radii
        .iter()
        .map(|&r| ((diff.dim as f64 - 1.0) * r.ln() + (a - 1.0) * diff.v_radial(r)).exp())
        .collect();
    let integrability_exponent = outer_decade_slope(&grid.radii, &density);
    let integrable = integrability_exponent < -1.0;

    let mut notes = vec!["checked on a finite radial grid; no extrapolation beyond R_max".to_string()];
    let decays = tail_slope < TAIL_SLOPE_FLOOR;
    if decays {
        notes.push(format!("lhs/phi_tilde decays at large |x| (log-log slope {tail_slope:.3})"));
    }
    if !integrable {
        notes.push("exp((a-1)V) does not appear integrable".into());
    }
    Ok(LyapunovCertificate {
        condition: LyapunovCondition::Kustr2,
        pass: margin >= 0.0 && !decays && integrable,
        params: BTreeMap::from([("a".to_string(), a)]),
        r_min: grid.r_min(),
        r_max: grid.r_max(),
        grid_points: grid.radii.len(),
        margin,
        c: None,
        tail_slope,
        phi_scale: Some(a),
        b: Some(b),
        integrability_exponent: Some(integrability_exponent),
        notes,
    })
}
