//! Truncated birth-death generators and their spectral data: gap, top
//! Schrödinger eigenvalue, Poisson-equation solutions and asymptotic
//! variance.
//!
//! The generator `L` is reversible with respect to `μ`, so
//! `S = D^{1/2} L D^{-1/2}` (with `D = diag μ`) is symmetric tridiagonal with
//! off-diagonals `√(b_k a_{k+1})`. Those are formed directly from the rates,
//! which keeps them accurate even where `μ_k` underflows.

pub mod tridiag;

use serde::Serialize;

use crate::chain_models::{invariant_measure, BirthDeathSpec, StationaryMeasure};
use crate::constants::Provenance;
use crate::error::{Error, Result};
use crate::observable::Observable;

pub use tridiag::SymTridiag;

/// Tolerance on `|μ(g)|` accepted as "centered".
pub const CENTERING_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    /// `lower[k] = L[k+1][k] = a_{k+1}`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// `upper[k] = L[k][k+1] = b_k`.
    pub upper: Vec<f64>,
    pub measure: StationaryMeasure,
    pub symmetric: SymTridiag,
}

impl GeneratorMatrix {
    pub fn truncation(&self) -> usize {
        self.diag.len() - 1
    }

    /// `(Lf)(k)` on the truncated chain.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|k| {
                let mut acc = self.diag[k] * f[k];
                if k > 0 {
                    acc += self.lower[k - 1] * f[k - 1];
                }
                if k + 1 < n {
                    acc += self.upper[k] * f[k + 1];
                }
                acc
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.diag.len()])
    }

    /// `‖−Lx − g‖_∞` over rows `0..N` (every row of the truncated system).
    pub fn poisson_residual(&self, solution: &[f64], g: &[f64]) -> f64 {
        self.apply(solution).iter().zip(g).map(|(lx, gk)| (-lx - gk).abs()).fold(0.0, f64::max)
    }
}

/// Tridiagonal generator of the chain truncated at `N` (reflecting: row `N`
/// drops the birth term).
pub fn build_generator(spec: &BirthDeathSpec, n: usize) -> Result<GeneratorMatrix> {
    let measure = invariant_measure(spec, n)?;
    let upper: Vec<f64> = (0..n).map(|k| spec.birth(k)).collect();
    let lower: Vec<f64> = (1..=n).map(|k| spec.death(k)).collect();
    let diag: Vec<f64> = (0..=n)
        .map(|k| {
            let b = if k < n { spec.birth(k) } else { 0.0 };
            -(b + spec.death(k))
        })
        .collect();
    let off: Vec<f64> = upper.iter().zip(&lower).map(|(b, a)| (b * a).sqrt()).collect();
    let symmetric = SymTridiag::new(diag.clone(), off)?;
    Ok(GeneratorMatrix { lower, diag, upper, measure, symmetric })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstants {
    pub c_p: f64,
    pub lambda_1: f64,
    /// Log-Sobolev constant; only ever supplied, never computed.
    pub c_ls: Option<f64>,
    pub c_p_provenance: Provenance,
    pub c_ls_provenance: Option<Provenance>,
}

impl SpectralConstants {
    pub fn from_gap(lambda_1: f64, provenance: Provenance) -> Result<Self> {
        if !(lambda_1 > 0.0) || !lambda_1.is_finite() {
            return Err(Error::numeric(format!("spectral gap must be positive, got {lambda_1}")));
        }
        Ok(Self { c_p: 1.0 / lambda_1, lambda_1, c_ls: None, c_p_provenance: provenance, c_ls_provenance: None })
    }

    pub fn with_log_sobolev(mut self, c_ls: f64, provenance: Provenance) -> Self {
        self.c_ls = Some(c_ls);
        self.c_ls_provenance = Some(provenance);
        self
    }
}

/// Second-smallest eigenvalue of `−S`.
pub fn spectral_gap(gen: &GeneratorMatrix) -> Result<SpectralConstants> {
    if gen.symmetric.len() < 2 {
        return Err(Error::numeric("spectral gap needs at least two states"));
    }
    let n = gen.symmetric.len();
    // the k-th smallest of −S is minus the (n−1−k)-th smallest of S
    let lambda_1 = -gen.symmetric.kth_smallest(n - 2)?;
    SpectralConstants::from_gap(lambda_1, Provenance::Computed)
}

/// Largest eigenvalue of `S + s·diag(g)`, the truncated `Λ(sg)`.
pub fn schrodinger_top_eig(gen: &GeneratorMatrix, g: &Observable, s: f64) -> Result<f64> {
    let n = gen.truncation();
    g.check_finite(n)?;
    let diag: Vec<f64> = gen.diag.iter().enumerate().map(|(k, d)| d + s * g.at_state(k)).collect();
    SymTridiag::new(diag, gen.symmetric.off.clone())?.largest()
}

fn check_centered(mu: &StationaryMeasure, g: &[f64]) -> Result<()> {
    let mean = mu.expect(g);
    let scale = mu.weights.iter().zip(g).map(|(w, v)| w * v.abs()).sum::<f64>().max(1.0);
    if mean.abs() > CENTERING_TOL * scale {
        return Err(Error::Precondition(format!("observable is not centered: mu(g) = {mean:e}")));
    }
    Ok(())
}

fn recentered(mu: &StationaryMeasure, mut values: Vec<f64>) -> Observable {
    let mean = mu.expect(&values);
    values.iter_mut().for_each(|v| *v -= mean);
    let mut out = Observable::table(values);
    out.centered = true;
    out.mean_under = Some(0.0);
    out
}

/// Poisson solution from the flux identity
/// `μ_k b_k (G(k+1) − G(k)) = −Σ_{j≤k} μ_j g(j)`.
///
/// Below the mode of `μ` the head sum is accumulated as
/// `H_k = g(k) + (a_k / b_{k−1}) H_{k−1}` (so `ΔG_k = −H_k / b_k`); from the
/// mode on, the tail form `R_k = g(k) + (b_k / a_{k+1}) R_{k+1}` with
/// `ΔG_k = R_{k+1} / a_{k+1}` is used. Both recursions only ever multiply by
/// ratios ≤ 1 on their side of the mode, and neither needs `μ` itself.
pub fn poisson_solve_explicit(spec: &BirthDeathSpec, mu: &StationaryMeasure, g: &Observable) -> Result<Observable> {
    let n = mu.truncation;
    let gv = g.values(n);
    if gv.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("observable is not finite on the truncated support"));
    }
    check_centered(mu, &gv)?;
    let mode = mu.mode();

    let mut increments = vec![0.0; n];
    let mut head = 0.0;
    for k in 0..mode.min(n) {
        head = if k == 0 { gv[0] } else { gv[k] + spec.death(k) / spec.birth(k - 1) * head };
        increments[k] = -head / spec.birth(k);
    }
    let mut tail = gv[n];
    for k in (mode..n).rev() {
        // tail holds R_{k+1}
        increments[k] = tail / spec.death(k + 1);
        tail = gv[k] + spec.birth(k) / spec.death(k + 1) * tail;
    }

    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    for d in &increments {
        let last = *values.last().unwrap();
        values.push(last + d);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("explicit Poisson solution overflowed"));
    }
    Ok(recentered(mu, values))
}

/// Poisson solution from a direct solve of `−L G = g`: `G(0)` is pinned to 0,
/// row 0 is dropped (it is implied by the others when `μ(g) = 0`), and the
/// remaining diagonally dominant system is solved by the Thomas algorithm.
/// The result is recentered to `μ(G) = 0`, which picks the solution
/// orthogonal to constants.
pub fn poisson_solve_spectral(gen: &GeneratorMatrix, g: &Observable) -> Result<Observable> {
    let n = gen.truncation();
    let gv = g.values(n);
    if gv.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("observable is not finite on the truncated support"));
    }
    check_centered(&gen.measure, &gv)?;
    // rows 1..=N of −L in the unknowns G(1..=N)
    let diag: Vec<f64> = gen.diag[1..].iter().map(|d| -d).collect();
    let lower: Vec<f64> = gen.lower[1..].iter().map(|a| -a).collect();
    let upper: Vec<f64> = gen.upper[1..].iter().map(|b| -b).collect();
    let rhs = gv[1..].to_vec();
    let interior = tridiag::solve_thomas(&lower, &diag, &upper, &rhs)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    values.extend(interior);

    let residual = gen.poisson_residual(&values, &gv);
    let scale = gv.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if residual > 1e-6 * scale {
        return Err(Error::numeric(format!("Poisson solve residual {residual:e} too large")));
    }
    Ok(recentered(&gen.measure, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoissonSolver {
    Explicit,
    #[default]
    Spectral,
}

/// `σ²(g) = 2 Σ μ_n G(n) g(n)` with `G` from the chosen solver.
pub fn asymptotic_variance_with(
    spec: &BirthDeathSpec,
    gen: &GeneratorMatrix,
    g: &Observable,
    solver: PoissonSolver,
) -> Result<f64> {
    let solution = match solver {
        PoissonSolver::Explicit => poisson_solve_explicit(spec, &gen.measure, g)?,
        PoissonSolver::Spectral => poisson_solve_spectral(gen, g)?,
    };
    let n = gen.truncation();
    let value: f64 =
        (0..=n).map(|k| gen.measure.weights[k] * solution.at_state(k) * g.at_state(k)).sum::<f64>() * 2.0;
    Ok(value.max(0.0))
}

pub fn asymptotic_variance(gen: &GeneratorMatrix, g: &Observable) -> Result<f64> {
    let solution = poisson_solve_spectral(gen, g)?;
    let n = gen.truncation();
    let value: f64 =
        (0..=n).map(|k| gen.measure.weights[k] * solution.at_state(k) * g.at_state(k)).sum::<f64>() * 2.0;
    Ok(value.max(0.0))
}

/// `Var_μ(g)` on the truncated support.
pub fn variance(mu: &StationaryMeasure, g: &Observable) -> f64 {
    let values = g.values(mu.truncation);
    let mean = mu.expect(&values);
    mu.weights.iter().zip(&values).map(|(w, v)| w * (v - mean) * (v - mean)).sum()
}

/// `sup_k |g(k+1) − g(k)| / (ρ(k+1) − ρ(k))` over the given values.
pub fn lip_rho_norm(g: &[f64], rho: &[f64]) -> Result<f64> {
    if g.len() != rho.len() {
        return Err(Error::domain("observable and rho must have the same length"));
    }
    let mut best = 0.0f64;
    for k in 0..g.len().saturating_sub(1) {
        let dr = rho[k + 1] - rho[k];
        if !(dr > 0.0) {
            return Err(Error::domain(format!("rho is not strictly increasing at {k}")));
        }
        best = best.max((g[k + 1] - g[k]).abs() / dr);
    }
    Ok(best)
}

/// `Γ(G)(n) = ½(b_n (G(n+1) − G(n))² + a_n (G(n−1) − G(n))²)` on the
/// truncated chain.
pub fn carre_du_champ(gen: &GeneratorMatrix, values: &[f64]) -> Vec<f64> {
    let n = gen.truncation();
    (0..=n)
        .map(|k| {
            let up = if k < n { gen.upper[k] * (values[k + 1] - values[k]).powi(2) } else { 0.0 };
            let down = if k > 0 { gen.lower[k - 1] * (values[k - 1] - values[k]).powi(2) } else { 0.0 };
            0.5 * (up + down)
        })
        .collect()
}

/// A truncation-sensitive quantity evaluated at `N` and `2N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationEstimate {
    pub n: usize,
    pub value: f64,
    pub value_2n: f64,
    /// `|value_2n − value|`: an observed difference, not a rigorous bound.
    pub difference: f64,
}

pub fn at_n_and_2n(n: usize, f: impl Fn(usize) -> Result<f64>) -> Result<TruncationEstimate> {
    let value = f(n)?;
    let value_2n = f(2 * n)?;
    Ok(TruncationEstimate { n, value, value_2n, difference: (value_2n - value).abs() })
}
