//! Birth-death chains on `ℕ`: rate specifications, invariant measures,
//! truncation and centered observables.
//!
//! Generator convention: `𝓛f(k) = b_k (f(k+1) − f(k)) + a_k (f(k−1) − f(k))`
//! with reflection at 0, i.e. state 0 has only the birth term.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observable::Observable;

pub type RateFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Default cap for [`choose_truncation`].
pub const DEFAULT_MAX_TRUNCATION: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BirthDeathFamily {
    /// `b_k = λ`, `a_k = k`; stationary law Poisson(λ).
    MmInfinity { lambda: f64 },
    /// `b_k = 1`, `a_k = 1 + a/(k+1)`; `π_n` decays like `n^{-a}`.
    Subgeometric { a: f64 },
    Other,
}

/// Birth rates `b_k > 0` (k ≥ 0) and death rates `a_k > 0` (k ≥ 1).
#[derive(Clone)]
pub struct BirthDeathSpec {
    pub name: String,
    birth: RateFn,
    death: RateFn,
    /// Last state of a finite chain; `None` for chains on all of `ℕ`.
    max_state: Option<usize>,
    pub family: BirthDeathFamily,
    pub known_params: BTreeMap<String, f64>,
}

impl fmt::Debug for BirthDeathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BirthDeathSpec")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("max_state", &self.max_state)
            .field("known_params", &self.known_params)
            .finish()
    }
}

impl BirthDeathSpec {
    pub fn new(
        name: impl Into<String>,
        birth: impl Fn(usize) -> f64 + Send + Sync + 'static,
        death: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            birth: Arc::new(birth),
            death: Arc::new(death),
            max_state: None,
            family: BirthDeathFamily::Other,
            known_params: BTreeMap::new(),
        }
    }

    /// M/M/∞ queue with arrival rate `λ` and unit service rate per client.
    pub fn mm_infinity(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Spec(format!("M/M/inf arrival rate must be > 0, got {lambda}")));
        }
        let mut spec = Self::new("mm_infinity", move |_| lambda, |k| k as f64);
        spec.family = BirthDeathFamily::MmInfinity { lambda };
        spec.known_params.insert("lambda".into(), lambda);
        Ok(spec)
    }

    /// `b_n ≡ 1`, `a_n = 1 + a/(n+1)`: positive recurrent iff `a > 1`.
    pub fn subgeometric(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Spec(format!("parameter a must be > 0, got {a}")));
        }
        let mut spec = Self::new("subgeometric", |_| 1.0, move |n| 1.0 + a / (n as f64 + 1.0));
        spec.family = BirthDeathFamily::Subgeometric { a };
        spec.known_params.insert("a".into(), a);
        Ok(spec)
    }

    /// Finite chain on `0..len` from per-state `(b_k, a_k)` rows. The death
    /// rate in row 0 and the birth rate in the last row are ignored.
    pub fn from_table(rows: &[(f64, f64)]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Spec("rate table needs at least two states".into()));
        }
        let last = rows.len() - 1;
        for (k, &(b, a)) in rows.iter().enumerate() {
            if k < last && !(b > 0.0 && b.is_finite()) {
                return Err(Error::Spec(format!("birth rate b_{k} must be > 0, got {b}")));
            }
            if k > 0 && !(a > 0.0 && a.is_finite()) {
                return Err(Error::Spec(format!("death rate a_{k} must be > 0, got {a}")));
            }
        }
        let births: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let deaths: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut spec = Self::new(
            "table",
            move |k| if k < last { births[k] } else { 0.0 },
            move |k| deaths.get(k).copied().unwrap_or(0.0),
        );
        spec.max_state = Some(last);
        Ok(spec)
    }

    /// Two states with `b_0` and `a_1`.
    pub fn two_state(b0: f64, a1: f64) -> Result<Self> {
        Self::from_table(&[(b0, 0.0), (0.0, a1)])
    }

    #[inline]
    pub fn birth(&self, k: usize) -> f64 {
        (self.birth)(k)
    }

    /// Death rate; `a_0 = 0` under the reflecting convention.
    #[inline]
    pub fn death(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            (self.death)(k)
        }
    }

    pub fn max_state(&self) -> Option<usize> {
        self.max_state
    }

    /// Check positivity of the rates used by a truncation at `n`.
    pub fn validate_up_to(&self, n: usize) -> Result<()> {
        if let Some(max) = self.max_state {
            if n > max {
                return Err(Error::Spec(format!("truncation {n} exceeds the finite chain's last state {max}")));
            }
        }
        for k in 0..n {
            let b = self.birth(k);
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::Spec(format!("birth rate b_{k} must be > 0, got {b}")));
            }
            let a = self.death(k + 1);
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Spec(format!("death rate a_{} must be > 0, got {a}", k + 1)));
            }
        }
        Ok(())
    }
}

/// How trustworthy the reported tail mass is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailBoundKind {
    /// Finite chain fully represented; no tail.
    Exact,
    /// Ratios `b_n/a_{n+1}` nonincreasing and below 1 on the probe window.
    Geometric,
    /// Ratios below 1 but increasing on the probe window; the window supremum
    /// is used as the geometric ratio.
    WindowSup,
    /// Some ratio on the window is ≥ 1.
    Unreliable,
}

/// Normalized invariant measure of a chain truncated at `N`.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryMeasure {
    /// `μ_0..μ_N`.
    pub weights: Vec<f64>,
    /// `log π_0..log π_N` with `π_0 = 1`.
    pub log_raw: Vec<f64>,
    /// `log C` with `C = Σ_{n ≤ N} π_n`.
    pub log_normalizer: f64,
    pub truncation: usize,
    pub tail_mass_bound: f64,
    pub tail_kind: TailBoundKind,
}

impl StationaryMeasure {
    /// `π_n`; may overflow to `inf` for extreme chains.
    pub fn raw(&self) -> Vec<f64> {
        self.log_raw.iter().map(|l| l.exp()).collect()
    }

    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// `log μ_n`, finite even where `μ_n` underflows.
    pub fn log_weight(&self, n: usize) -> f64 {
        self.log_raw[n] - self.log_normalizer
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `μ(g) = Σ μ_n g(n)` over the truncated support.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn mean_of(&self, g: &Observable) -> f64 {
        self.weights.iter().enumerate().map(|(n, w)| w * g.at_state(n)).sum()
    }

    /// Largest relative violation of `μ_{n+1} a_{n+1} = μ_n b_n`, in log space.
    pub fn detailed_balance_residual(&self, spec: &BirthDeathSpec) -> f64 {
        (0..self.truncation)
            .map(|n| {
                let lhs = self.log_raw[n + 1] + spec.death(n + 1).ln();
                let rhs = self.log_raw[n] + spec.birth(n).ln();
                (lhs - rhs).exp_m1().abs()
            })
            .fold(0.0, f64::max)
    }

    /// Index of the largest weight.
    pub fn mode(&self) -> usize {
        self.log_raw
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Invariant measure of the chain truncated at `N`, computed in log space.
pub fn invariant_measure(spec: &BirthDeathSpec, n: usize) -> Result<StationaryMeasure> {
    if n < 1 {
        return Err(Error::domain("truncation N must be >= 1"));
    }
    spec.validate_up_to(n)?;
    let mut log_raw = Vec::with_capacity(n + 1);
    log_raw.push(0.0);
    for k in 1..=n {
        let next = log_raw[k - 1] + spec.birth(k - 1).ln() - spec.death(k).ln();
        if !next.is_finite() {
            return Err(Error::numeric(format!("log pi_{k} is not finite")));
        }
        log_raw.push(next);
    }
    let log_normalizer = log_sum_exp(&log_raw);
    if !log_normalizer.is_finite() {
        return Err(Error::numeric("normalizer overflowed in log space"));
    }
    let weights: Vec<f64> = log_raw.iter().map(|l| (l - log_normalizer).exp()).collect();

    let (tail_mass_bound, tail_kind) = if spec.max_state() == Some(n) {
        (0.0, TailBoundKind::Exact)
    } else {
        let window_end = match spec.max_state() {
            Some(max) => (2 * n).min(max.saturating_sub(1)),
            None => 2 * n,
        };
        let ratios: Vec<f64> = (n..=window_end.max(n)).map(|k| spec.birth(k) / spec.death(k + 1)).collect();
        let sup = ratios.iter().copied().fold(0.0, f64::max);
        if !(sup < 1.0) {
            (f64::INFINITY, TailBoundKind::Unreliable)
        } else {
            let nonincreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
            let kind = if nonincreasing { TailBoundKind::Geometric } else { TailBoundKind::WindowSup };
            ((log_raw[n] - log_normalizer).exp() / (1.0 - sup), kind)
        }
    };

    Ok(StationaryMeasure { weights, log_raw, log_normalizer, truncation: n, tail_mass_bound, tail_kind })
}

/// Smallest `N` whose tail mass bound is below `epsilon`, searched by doubling
/// then bisection, failing at `max_n`.
pub fn choose_truncation(spec: &BirthDeathSpec, epsilon: f64, max_n: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let cap = match spec.max_state() {
        Some(max) => max.min(max_n),
        None => max_n,
    };
    if cap < 1 {
        return Err(Error::domain("truncation cap must be >= 1"));
    }
    let ok = |n: usize| -> Result<(bool, f64)> {
        let m = invariant_measure(spec, n)?;
        let good = m.tail_kind != TailBoundKind::Unreliable && m.tail_mass_bound < epsilon;
        Ok((good, m.tail_mass_bound))
    };

    let mut hi = 1usize;
    let mut last_bound;
    loop {
        let (good, bound) = ok(hi)?;
        last_bound = bound;
        if good {
            break;
        }
        if hi >= cap {
            return Err(Error::Truncation { n: cap, achieved: last_bound, epsilon });
        }
        hi = (hi * 2).min(cap);
    }
    let mut lo = hi / 2;
    // invariant: ok(hi); lo == 0 or !ok(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.max(1))
}

/// `g − μ(g)` under the truncated measure.
pub fn center_observable(g: &Observable, mu: &StationaryMeasure) -> Observable {
    g.centered_by(mu.mean_of(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceVerdict {
    LikelyPositiveRecurrent,
    LikelyNot,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceCheckpoint {
    pub n: usize,
    /// `log Σ_{k ≤ n} π_k`.
    pub log_mass: f64,
    /// `log Σ_{k ≤ n} π_k Σ_{k ≤ i ≤ n} (π_i b_i)^{-1}`.
    pub log_second_series: f64,
}

/// Finite-probe evidence about positive recurrence. Heuristic only: the
/// underlying criteria are statements about infinite series.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub checkpoints: Vec<RecurrenceCheckpoint>,
    /// Slope of `log π_n` against `log n` on the last decade of the probe.
    pub tail_exponent: f64,
    pub verdict: RecurrenceVerdict,
    pub heuristic: bool,
}

fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub(crate) fn log_log_slope(ns: &[usize], log_values: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    regression_slope(&xs, log_values)
}

const SUMMABLE_SLOPE: f64 = -1.1;
const DIVERGENT_SLOPE: f64 = -0.9;

pub fn recurrence_diagnostic(spec: &BirthDeathSpec, n_probe: usize) -> Result<RecurrenceReport> {
    if n_probe < 10 {
        return Err(Error::domain("recurrence probe needs N_probe >= 10"));
    }
    let n_probe = spec.max_state().map_or(n_probe, |m| n_probe.min(m));
    spec.validate_up_to(n_probe)?;

    let mut log_pi = vec![0.0];
    for k in 1..=n_probe {
        log_pi.push(log_pi[k - 1] + spec.birth(k - 1).ln() - spec.death(k).ln());
    }
    let log_inv_flux: Vec<f64> = (0..=n_probe).map(|i| -(log_pi[i] + spec.birth(i).ln())).collect();

    let mut checkpoints = Vec::new();
    let mut cp = 10usize;
    loop {
        let p = cp.min(n_probe);
        let log_mass = log_sum_exp(&log_pi[..=p]);
        // inner tails Σ_{n ≤ i ≤ p}, accumulated backwards in log space
        let mut inner = vec![f64::NEG_INFINITY; p + 1];
        let mut acc = f64::NEG_INFINITY;
        for i in (0..=p).rev() {
            acc = log_sum_exp(&[acc, log_inv_flux[i]]);
            inner[i] = acc;
        }
        let terms: Vec<f64> = (0..=p).map(|n| log_pi[n] + inner[n]).collect();
        checkpoints.push(RecurrenceCheckpoint { n: p, log_mass, log_second_series: log_sum_exp(&terms) });
        if p == n_probe {
            break;
        }
        cp *= 2;
    }

    let lo = (n_probe / 10).max(1);
    let ns: Vec<usize> = (lo..=n_probe).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| log_pi[n]).collect();
    let tail_exponent = log_log_slope(&ns, &ys);

    let second_growing = match checkpoints.as_slice() {
        [.., a, b] => b.log_second_series - a.log_second_series > 1.5f64.ln(),
        _ => false,
    };
    let finite_chain = spec.max_state().is_some();
    let verdict = if finite_chain {
        RecurrenceVerdict::LikelyPositiveRecurrent
    } else if tail_exponent > DIVERGENT_SLOPE || !second_growing {
        RecurrenceVerdict::LikelyNot
    } else if tail_exponent < SUMMABLE_SLOPE {
        RecurrenceVerdict::LikelyPositiveRecurrent
    } else {
        RecurrenceVerdict::Inconclusive
    };

    Ok(RecurrenceReport { checkpoints, tail_exponent, verdict, heuristic: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn mm_infinity_measure_is_poisson() {
        for &lambda in &[0.5, 1.0, 3.0] {
            let spec = BirthDeathSpec::mm_infinity(lambda).unwrap();
            let mu = invariant_measure(&spec, 60).unwrap();
            for n in 0..=30 {
                let expected = (-lambda + n as f64 * f64::ln(lambda) - ln_factorial(n)).exp();
                assert!((mu.weights[n] - expected).abs() <= 1e-13 * expected.max(1e-300) + 1e-300);
            }
            let total: f64 = mu.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(mu.detailed_balance_residual(&spec) < 1e-12);
        }
    }

    #[test]
    fn symmetric_two_state() {
        let spec = BirthDeathSpec::two_state(2.0, 2.0).unwrap();
        let mu = invariant_measure(&spec, 1).unwrap();
        assert_eq!(mu.raw(), vec![1.0, 1.0]);
        assert!((mu.weights[0] - 0.5).abs() < 1e-15);
        assert_eq!(mu.tail_kind, TailBoundKind::Exact);
        assert_eq!(mu.tail_mass_bound, 0.0);
        let lopsided = BirthDeathSpec::two_state(1.0, 3.0).unwrap();
        assert_eq!(invariant_measure(&lopsided, 1).unwrap().raw()[1], 1.0 / 3.0);
    }

    #[test]
    fn subgeometric_power_tail() {
        let a = 2.0;
        let spec = BirthDeathSpec::subgeometric(a).unwrap();
        let mu = invariant_measure(&spec, 1000).unwrap();
        let ns: Vec<usize> = (100..=1000).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| mu.log_raw[n]).collect();
        let slope = log_log_slope(&ns, &ys);
        assert!((slope + a).abs() < 0.02, "slope {slope}");
        // n² π_n settles to a constant
        let c1 = (mu.log_raw[500] + 2.0 * 500f64.ln()).exp();
        let c2 = (mu.log_raw[1000] + 2.0 * 1000f64.ln()).exp();
        assert!((c1 - c2).abs() / c2 < 0.01);
    }

    #[test]
    fn rejects_bad_rates_and_truncation() {
        let bad = BirthDeathSpec::new("bad", |_| 1.0, |k| if k == 3 { 0.0 } else { 1.0 });
        assert!(matches!(invariant_measure(&bad, 5), Err(Error::Spec(_))));
        let spec = BirthDeathSpec::mm_infinity(1.0).unwrap();
        assert!(invariant_measure(&spec, 0).is_err());
        assert!(BirthDeathSpec::mm_infinity(-1.0).is_err());
    }

    #[test]
    fn truncation_for_poisson_tail() {
        let spec = BirthDeathSpec::mm_infinity(1.0).unwrap();
        let n = choose_truncation(&spec, 1e-12, DEFAULT_MAX_TRUNCATION).unwrap();
        assert!(n <= 40, "N = {n}");
        // direct Poisson tail beyond N
        let tail: f64 = (n + 1..200).map(|k| (-1.0 - ln_factorial(k)).exp()).sum();
        assert!(tail < 1e-12);
        let small = choose_truncation(&spec, 0.5, DEFAULT_MAX_TRUNCATION).unwrap();
        assert!((1..=3).contains(&small));
        assert!(choose_truncation(&spec, 1.5, 10).is_err());
    }

    #[test]
    fn truncation_heavy_tail() {
        // π_n ~ n^{-1.5}: a 1e-6 tail needs N of order 1e12, beyond any cap.
        let heavy = BirthDeathSpec::subgeometric(1.5).unwrap();
        match choose_truncation(&heavy, 1e-6, DEFAULT_MAX_TRUNCATION) {
            Err(Error::Truncation { n, achieved, .. }) => {
                assert_eq!(n, DEFAULT_MAX_TRUNCATION);
                assert!(achieved > 1e-6 && achieved < 1e-1);
            }
            other => panic!("expected truncation failure, got {other:?}"),
        }

        let spec = BirthDeathSpec::subgeometric(3.0).unwrap();
        let eps = 1e-6;
        let n = choose_truncation(&spec, eps, DEFAULT_MAX_TRUNCATION).unwrap();
        assert!(n > 100, "heavy tail should need a large N, got {n}");
        // direct tail-sum check against a much longer truncation plus an
        // integral bound for the remainder
        let far = 400 * n;
        let long = invariant_measure(&spec, far).unwrap();
        let direct: f64 = long.weights[n + 1..].iter().sum();
        let last = long.weights[far];
        let remainder = last * far as f64 / 2.0; // ∫ x^{-3} beyond `far`
        assert!(direct + remainder < eps, "tail {} not below {eps}", direct + remainder);
        let mu_n = invariant_measure(&spec, n).unwrap();
        assert!(mu_n.tail_mass_bound >= direct);
    }

    #[test]
    fn centering() {
        let spec = BirthDeathSpec::mm_infinity(2.5).unwrap();
        let mu = invariant_measure(&spec, 80).unwrap();
        let g0 = center_observable(&Observable::identity(), &mu);
        for n in 0..10 {
            assert!((g0.at_state(n) - (n as f64 - 2.5)).abs() < 1e-12);
        }
        assert!(mu.mean_of(&g0).abs() < 1e-10);
        let again = center_observable(&g0, &mu);
        assert!((again.at_state(7) - g0.at_state(7)).abs() < 1e-12);

        let zero = center_observable(&Observable::constant(4.0), &mu);
        assert!(zero.values(20).iter().all(|v| v.abs() < 1e-12));

        let one = BirthDeathSpec::mm_infinity(1.0).unwrap();
        let mu1 = invariant_measure(&one, 80).unwrap();
        let sq = center_observable(&Observable::polynomial(vec![0.0, 0.0, 1.0]), &mu1);
        for n in 0..10 {
            assert!((sq.at_state(n) - (n as f64 * n as f64 - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_stability() {
        let spec = BirthDeathSpec::subgeometric(2.5).unwrap();
        let small = invariant_measure(&spec, 200).unwrap();
        let large = invariant_measure(&spec, 400).unwrap();
        let drift = (large.weights[..=200].iter().sum::<f64>() - 1.0).abs();
        let renorm = large.weights[..=200].iter().sum::<f64>();
        for n in 0..=200 {
            let rescaled = large.weights[n] / renorm;
            assert!((rescaled - small.weights[n]).abs() <= 1e-12 * small.weights[n]);
        }
        assert!(drift <= small.tail_mass_bound);
    }

    #[test]
    fn recurrence_examples() {
        let mm = recurrence_diagnostic(&BirthDeathSpec::mm_infinity(1.0).unwrap(), 200).unwrap();
        assert_eq!(mm.verdict, RecurrenceVerdict::LikelyPositiveRecurrent);
        let good = recurrence_diagnostic(&BirthDeathSpec::subgeometric(2.0).unwrap(), 5000).unwrap();
        assert_eq!(good.verdict, RecurrenceVerdict::LikelyPositiveRecurrent);
        assert!(good.heuristic);
        let bad = recurrence_diagnostic(&BirthDeathSpec::subgeometric(0.5).unwrap(), 5000).unwrap();
        assert_eq!(bad.verdict, RecurrenceVerdict::LikelyNot);
        assert!(recurrence_diagnostic(&BirthDeathSpec::subgeometric(0.5).unwrap(), 5).is_err());
    }
}
