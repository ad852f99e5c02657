//! Symmetric tridiagonal eigenvalues by Sturm bisection, plus tridiagonal
//! linear solves.

use crate::error::{Error, Result};

const BISECTION_CAP: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[k]` couples rows `k` and `k+1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::numeric(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        if diag.iter().chain(&off).any(|v| !v.is_finite()) {
            return Err(Error::numeric("tridiagonal matrix has non-finite entries"));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            let r = left + right;
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0.. {
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
            if i + 1 == self.len() {
                break;
            }
            q = self.diag[i + 1] - x - self.off[i] * self.off[i] / q;
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based).
    pub fn kth_smallest(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::numeric(format!("eigenvalue index {k} out of range for size {}", self.len())));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs())).max(1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let width = hi - lo;
        if width > 1e-10 * (lo.abs().max(hi.abs())).max(1.0) {
            return Err(Error::numeric("eigenvalue bisection did not converge"));
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn largest(&self) -> Result<f64> {
        self.kth_smallest(self.len() - 1)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        (0..self.len()).map(|k| self.kth_smallest(k)).collect()
    }

    /// Unit eigenvector for an (accurately computed) eigenvalue, by inverse
    /// iteration with a slightly perturbed shift.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let (lo, hi) = self.gershgorin();
        let shift = lambda + 1e-10 * (lo.abs().max(hi.abs())).max(1.0);
        let shifted_diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            v = solve_general(&self.off, &shifted_diag, &self.off, &v)?;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::numeric("inverse iteration broke down"));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Thomas algorithm for `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] =
/// rhs[i]`. Intended for diagonally dominant systems; no pivoting.
pub fn solve_thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(Error::numeric("tridiagonal system shape mismatch"));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - lower[i - 1] * c[i - 1];
        }
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::numeric(format!("zero pivot at row {i} in tridiagonal solve")));
        }
        if i + 1 < n {
            c[i] = upper[i] / denom;
        }
        d[i] = if i > 0 { (rhs[i] - lower[i - 1] * d[i - 1]) / denom } else { rhs[0] / denom };
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Tridiagonal solve with partial pivoting (Gaussian elimination keeping a
/// second superdiagonal for row swaps).
pub fn solve_general(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(Error::numeric("tridiagonal system shape mismatch"));
    }
    let mut dl: Vec<f64> = lower.to_vec();
    let mut d: Vec<f64> = diag.to_vec();
    let mut du: Vec<f64> = upper.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            du[i] = tmp;
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        if i + 1 < n {
            acc -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= du2[i] * x[i + 2];
        }
        x[i] = acc / d[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("tridiagonal solve produced non-finite values"));
    }
    Ok(x)
}
