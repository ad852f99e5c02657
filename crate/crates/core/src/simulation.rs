//! Path simulation of time averages `L_t(g) = (1/t)∫₀ᵗ g(X_s) ds`, Monte
//! Carlo tail estimates with binomial confidence intervals, and validation of
//! tail envelopes against them.
//!
//! Every path `i` draws from its own ChaCha8 stream `(seed, i)`, and paths are
//! merged by index, so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bound_algebra::{tail_envelope, BernsteinParams};
use crate::chain_models::{BirthDeathFamily, BirthDeathSpec, StationaryMeasure};
use crate::diffusion::{euler_maruyama_step, ou_transition_sample, OUSpec, PotentialDiffusion, RadialSampler};
use crate::error::{Error, Result};
use crate::observable::Observable;

/// Default bound on chain states reached during simulation.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;
/// Smallest number of paths accepted for a tail estimate.
pub const MIN_PATHS: usize = 100;
const Z_95: f64 = 1.959_963_984_540_054;
const Z_95_ONE_SIDED: f64 = 1.644_853_626_951_472;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Stationary,
    /// A chain state.
    State(usize),
    /// A point of `ℝ^d`.
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub t_max: f64,
    /// Mesh for diffusions; ignored for chains. Defaults to `0.01θ` for OU and
    /// `0.01` for potential diffusions.
    pub dt: Option<f64>,
    pub seed: u64,
    pub initial: Initial,
}

impl TrajectoryConfig {
    pub fn new(t_max: f64, seed: u64, initial: Initial) -> Result<Self> {
        let cfg = Self { t_max, dt: None, seed, initial };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = Some(dt);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::domain(format!("t_max must be finite and > 0, got {}", self.t_max)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::domain(format!("dt must be finite and > 0, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over the truncated invariant measure.
#[derive(Debug, Clone)]
struct DiscreteSampler {
    cdf: Vec<f64>,
}

impl DiscreteSampler {
    fn new(mu: &StationaryMeasure) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = mu
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[derive(Debug, Clone)]
pub struct BirthDeathProcess {
    pub spec: BirthDeathSpec,
    stationary: Option<DiscreteSampler>,
    pub state_cap: usize,
}

#[derive(Debug, Clone)]
pub struct PotentialProcess {
    pub diffusion: PotentialDiffusion,
    stationary: RadialSampler,
}

/// A process that can be simulated.
#[derive(Debug, Clone)]
pub enum ProcessModel {
    BirthDeath(BirthDeathProcess),
    Ou(OUSpec),
    Potential(PotentialProcess),
}

impl ProcessModel {
    /// A chain; `mu` enables stationary starts.
    pub fn birth_death(spec: BirthDeathSpec, mu: Option<&StationaryMeasure>) -> Self {
        ProcessModel::BirthDeath(BirthDeathProcess {
            spec,
            stationary: mu.map(DiscreteSampler::new),
            state_cap: DEFAULT_STATE_CAP,
        })
    }

    pub fn ou(theta: f64) -> Result<Self> {
        Ok(ProcessModel::Ou(OUSpec::new(theta)?))
    }

    pub fn potential(diffusion: PotentialDiffusion) -> Result<Self> {
        let stationary = RadialSampler::new(&diffusion)?;
        Ok(ProcessModel::Potential(PotentialProcess { diffusion, stationary }))
    }

    pub fn with_state_cap(mut self, cap: usize) -> Self {
        if let ProcessModel::BirthDeath(bd) = &mut self {
            bd.state_cap = cap;
        }
        self
    }

    pub fn label(&self) -> String {
        match self {
            ProcessModel::BirthDeath(bd) => bd.spec.name.clone(),
            ProcessModel::Ou(ou) => format!("ou(theta={})", ou.theta),
            ProcessModel::Potential(p) => format!("potential({:?}, d={})", p.diffusion.profile, p.diffusion.dim),
        }
    }

    fn default_dt(&self) -> f64 {
        match self {
            ProcessModel::Ou(ou) => 0.01 * ou.theta,
            _ => 0.01,
        }
    }

    fn is_continuous(&self) -> bool {
        !matches!(self, ProcessModel::BirthDeath(_))
    }
}

/// Stream `(seed, path)` for path replication `path`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::domain("time grid must be non-empty with finite t > 0"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("time grid must be nondecreasing"));
    }
    Ok(())
}

/// Jump-chain record of one chain path on `[0, t_max]`: `(jump time, new
/// state)` pairs after the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BdPath {
    pub t_max: f64,
    pub initial_state: usize,
    pub jumps: Vec<(f64, usize)>,
}

impl BdPath {
    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |j| j.1)
    }

    /// `L_t(g)` by post-processing the event log.
    pub fn time_average(&self, g: &Observable) -> f64 {
        let mut integral = 0.0;
        let mut t = 0.0;
        let mut state = self.initial_state;
        for &(tj, next) in &self.jumps {
            integral += g.at_state(state) * (tj - t);
            t = tj;
            state = next;
        }
        integral += g.at_state(state) * (self.t_max - t);
        integral / self.t_max
    }
}

fn bd_initial<R: Rng + ?Sized>(bd: &BirthDeathProcess, initial: &Initial, rng: &mut R) -> Result<usize> {
    match initial {
        Initial::Stationary => bd
            .stationary
            .as_ref()
            .map(|s| s.sample(rng))
            .ok_or_else(|| Error::Precondition("stationary start needs an invariant measure".into())),
        Initial::State(n) => Ok(*n),
        Initial::Point(_) => Err(Error::Spec("chain start must be a state, not a point".into())),
    }
}

/// Competing exponential clocks; `L_t` recorded at each checkpoint.
fn bd_path<R: Rng + ?Sized>(
    bd: &BirthDeathProcess,
    g: &Observable,
    times: &[f64],
    initial: &Initial,
    rng: &mut R,
    mut log: Option<&mut Vec<(f64, usize)>>,
) -> Result<(Vec<f64>, usize)> {
    let mut state = bd_initial(bd, initial, rng)?;
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    // integral of g − g(X_0), so that constant observables come out exact
    let g_ref = g.at_state(state);
    let mut integral = 0.0;
    let mut next = 0;
    while next < times.len() {
        if state > bd.state_cap {
            return Err(Error::StateCap { state, cap: bd.state_cap });
        }
        let up = bd.spec.birth(state);
        let down = bd.spec.death(state);
        let rate = up + down;
        let hold = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
        let gx = g.at_state(state) - g_ref;
        while next < times.len() && times[next] <= t + hold {
            out.push(g_ref + (integral + gx * (times[next] - t)) / times[next]);
            next += 1;
        }
        if next == times.len() {
            break;
        }
        integral += gx * hold;
        t += hold;
        let u: f64 = rng.random();
        state = if u * rate < up { state + 1 } else { state - 1 };
        if let Some(log) = log.as_deref_mut() {
            log.push((t, state));
        }
    }
    Ok((out, state))
}

fn diffusion_scalar(x: &[f64]) -> f64 {
    if x.len() == 1 {
        x[0]
    } else {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Mesh paths with trapezoid integration. Checkpoint `t` is reached after
/// `round(t/dt)` steps (at least one).
fn diffusion_path<R: Rng + ?Sized>(
    model: &ProcessModel,
    g: &Observable,
    times: &[f64],
    dt: f64,
    initial: &Initial,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let checkpoints: Vec<usize> = times.iter().map(|t| ((t / dt).round() as usize).max(1)).collect();
    let mut out = Vec::with_capacity(times.len());
    match model {
        ProcessModel::Ou(ou) => {
            let mut x = match initial {
                Initial::Stationary => ou_transition_sample(0.0, f64::INFINITY, ou.theta, rng),
                Initial::Point(p) if p.len() == 1 => p[0],
                _ => return Err(Error::Spec("OU start must be stationary or a point in R".into())),
            };
            let g_ref = g.eval(x);
            let mut gx = 0.0;
            let mut integral = 0.0;
            let mut step = 0;
            for &k in &checkpoints {
                while step < k {
                    let y = ou_transition_sample(x, dt, ou.theta, rng);
                    let gy = g.eval(y) - g_ref;
                    integral += 0.5 * (gx + gy) * dt;
                    x = y;
                    gx = gy;
                    step += 1;
                }
                out.push(g_ref + integral / (k as f64 * dt));
            }
        }
        ProcessModel::Potential(p) => {
            let mut x = match initial {
                Initial::Stationary => p.stationary.sample(rng),
                Initial::Point(pt) if pt.len() == p.diffusion.dim => pt.clone(),
                _ => return Err(Error::Spec("potential start must be stationary or a point of matching dimension".into())),
            };
            let g_ref = g.eval(diffusion_scalar(&x));
            let mut gx = 0.0;
            let mut integral = 0.0;
            let mut step = 0;
            for &k in &checkpoints {
                while step < k {
                    x = euler_maruyama_step(&x, dt, &p.diffusion, rng)?;
                    let gy = g.eval(diffusion_scalar(&x)) - g_ref;
                    integral += 0.5 * (gx + gy) * dt;
                    gx = gy;
                    step += 1;
                }
                out.push(g_ref + integral / (k as f64 * dt));
            }
        }
        ProcessModel::BirthDeath(_) => unreachable!("chains use the jump simulator"),
    }
    Ok(out)
}

fn path_averages(
    model: &ProcessModel,
    g: &Observable,
    times: &[f64],
    dt: Option<f64>,
    initial: &Initial,
    seed: u64,
    path: u64,
) -> Result<Vec<f64>> {
    let mut rng = path_rng(seed, path);
    match model {
        ProcessModel::BirthDeath(bd) => bd_path(bd, g, times, initial, &mut rng, None).map(|r| r.0),
        _ => diffusion_path(model, g, times, dt.unwrap_or_else(|| model.default_dt()), initial, &mut rng),
    }
}

/// `L_t(g)` for every path and every `t` in a nondecreasing grid;
/// `result[path][k]` belongs to `times[k]`.
pub fn time_average_samples(
    model: &ProcessModel,
    g: &Observable,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    initial: &Initial,
    dt: Option<f64>,
) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    if let Some(dt) = dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("dt must be finite and > 0, got {dt}")));
        }
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| path_averages(model, g, times, dt, initial, seed, i))
        .collect()
}

/// `L_t(g)` on one chain path (stream 0 of the seed).
pub fn simulate_bd_time_average(
    spec: &BirthDeathSpec,
    mu: Option<&StationaryMeasure>,
    g: &Observable,
    config: &TrajectoryConfig,
) -> Result<f64> {
    config.validate()?;
    let model = ProcessModel::birth_death(spec.clone(), mu);
    Ok(path_averages(&model, g, &[config.t_max], None, &config.initial, config.seed, 0)?[0])
}

/// Full jump record of the chain path that [`simulate_bd_time_average`]
/// integrates for the same arguments.
pub fn simulate_bd_path(spec: &BirthDeathSpec, mu: Option<&StationaryMeasure>, config: &TrajectoryConfig) -> Result<BdPath> {
    config.validate()?;
    let ProcessModel::BirthDeath(bd) = ProcessModel::birth_death(spec.clone(), mu) else { unreachable!() };
    let mut rng = path_rng(config.seed, 0);
    let mut jumps = Vec::new();
    let mut probe = rng.clone();
    let initial_state = bd_initial(&bd, &config.initial, &mut probe)?;
    bd_path(&bd, &Observable::constant(0.0), &[config.t_max], &config.initial, &mut rng, Some(&mut jumps))?;
    Ok(BdPath { t_max: config.t_max, initial_state, jumps })
}

/// `L_t(g)` on one OU or potential-diffusion path (stream 0 of the seed).
pub fn simulate_diffusion_time_average(model: &ProcessModel, g: &Observable, config: &TrajectoryConfig) -> Result<f64> {
    config.validate()?;
    if !model.is_continuous() {
        return Err(Error::Spec("expected a diffusion model".into()));
    }
    Ok(path_averages(model, g, &[config.t_max], config.dt, &config.initial, config.seed, 0)?[0])
}

// ---------------------------------------------------------------------------
// Tail estimates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    #[default]
    Wilson,
    ClopperPearson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: IntervalMethod,
    /// No hits: the interval is one-sided `[0, upper 95%]`.
    pub one_sided: bool,
}

fn wilson(hits: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    if hits == 0 {
        let z2 = Z_95_ONE_SIDED * Z_95_ONE_SIDED;
        return (0.0, z2 / (nf + z2));
    }
    let p = hits as f64 / nf;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

fn clopper_pearson(hits: usize, n: usize) -> Result<(f64, f64)> {
    let beta_quantile = |a: f64, b: f64, q: f64| -> Result<f64> {
        Beta::new(a, b).map(|d| d.inverse_cdf(q)).map_err(|e| Error::numeric(format!("beta quantile: {e}")))
    };
    if hits == 0 {
        return Ok((0.0, 1.0 - 0.05f64.powf(1.0 / n as f64)));
    }
    let k = hits as f64;
    let nf = n as f64;
    let low = beta_quantile(k, nf - k + 1.0, 0.025)?;
    let high = if hits == n { 1.0 } else { beta_quantile(k + 1.0, nf - k, 0.975)? };
    let p = k / nf;
    Ok((low.clamp(0.0, p), high.clamp(p, 1.0)))
}

impl TailEstimate {
    pub fn from_counts(hits: usize, n_paths: usize, method: IntervalMethod) -> Result<Self> {
        if n_paths == 0 || hits > n_paths {
            return Err(Error::domain(format!("invalid counts: {hits} hits of {n_paths}")));
        }
        let (ci_low, ci_high) = match method {
            IntervalMethod::Wilson => wilson(hits, n_paths),
            IntervalMethod::ClopperPearson => clopper_pearson(hits, n_paths)?,
        };
        Ok(Self {
            p_hat: hits as f64 / n_paths as f64,
            hits,
            n_paths,
            ci_low,
            ci_high,
            method,
            one_sided: hits == 0,
        })
    }
}

/// Sampling setup shared by the Monte Carlo operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub initial: Initial,
    pub dt: Option<f64>,
    pub method: IntervalMethod,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, initial: Initial::Stationary, dt: None, method: IntervalMethod::Wilson }
    }

    pub fn with_method(mut self, method: IntervalMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_initial(mut self, initial: Initial) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::Precondition(format!("need at least {MIN_PATHS} paths, got {}", self.n_paths)));
        }
        Ok(())
    }
}

fn count_hits(samples: &[Vec<f64>], k: usize, r: f64) -> usize {
    samples.iter().filter(|s| s[k] > r).count()
}

/// Estimate of `ℙ(L_t(g) > r)`.
pub fn mc_tail_estimate(model: &ProcessModel, g: &Observable, t: f64, r: f64, mc: &McConfig) -> Result<TailEstimate> {
    mc.check()?;
    let samples = time_average_samples(model, g, &[t], mc.n_paths, mc.seed, &mc.initial, mc.dt)?;
    TailEstimate::from_counts(count_hits(&samples, 0, r), mc.n_paths, mc.method)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn of(estimate: &TailEstimate, bound: f64) -> Self {
        if estimate.ci_high <= bound {
            Verdict::Pass
        } else if estimate.ci_low > bound {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    pub r: f64,
    pub estimate: TailEstimate,
    pub bound: f64,
    pub bound_route: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub model: String,
    pub observable: String,
    pub params: BernsteinParams,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == verdict).count()
    }

    pub fn any_fail(&self) -> bool {
        self.count(Verdict::Fail) > 0
    }
}

/// Compares Monte Carlo tail estimates with `min(1, prefactor·e^{−tα(r)})` over
/// `t_grid × r_grid`. Levels `r ≤ 0` get the trivial bound 1. One set of paths
/// serves every `(t, r)` pair.
pub fn validate_bound(
    model: &ProcessModel,
    g: &Observable,
    params: &BernsteinParams,
    route: &str,
    t_grid: &[f64],
    r_grid: &[f64],
    mc: &McConfig,
) -> Result<TailReport> {
    mc.check()?;
    match (&mc.initial, params.prefactor == 1.0) {
        (Initial::Stationary, false) => {
            return Err(Error::Precondition("a stationary start has prefactor 1".into()));
        }
        (Initial::Point(_), _) if model.is_continuous() => {
            return Err(Error::Precondition(
                "a point start on a continuous space has no finite prefactor; use a stationary start".into(),
            ));
        }
        _ => {}
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain("level grid must be non-empty and finite"));
    }
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| t_grid[i]).collect();
    let samples = time_average_samples(model, g, &sorted, mc.n_paths, mc.seed, &mc.initial, mc.dt)?;

    let mut rows = Vec::with_capacity(t_grid.len() * r_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let k = order.iter().position(|&i| i == ti).expect("index present");
        for &r in r_grid {
            let estimate = TailEstimate::from_counts(count_hits(&samples, k, r), mc.n_paths, mc.method)?;
            let bound = if r > 0.0 { tail_envelope(params, t, r)? } else { 1.0 };
            rows.push(TailRow { t, r, estimate, bound, bound_route: route.to_string(), verdict: Verdict::of(&estimate, bound) });
        }
    }
    Ok(TailReport { model: model.label(), observable: g.label(), params: *params, rows })
}

// ---------------------------------------------------------------------------
// Large-deviation rates

/// `lim (1/t) log ℙ((1/t)∫₀ᵗ X_s ds > λ + r) = −r²/(λ(√(1+r/λ)+1)²)` for
/// M/M/∞; returns the positive rate.
pub fn mminf_ldp_limit(lambda: f64, r: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(r > 0.0) {
        return Err(Error::domain(format!("need lambda > 0 and r > 0, got {lambda}, {r}")));
    }
    let s = (1.0 + r / lambda).sqrt() + 1.0;
    Ok(r * r / (lambda * s * s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpRow {
    pub t: f64,
    pub estimate: TailEstimate,
    /// `−(1/t) log p̂`; `None` when `p̂ = 0`.
    pub rate: Option<f64>,
    /// `−(1/t) log ci_high`.
    pub rate_low: f64,
    /// `−(1/t) log ci_low`, `+∞` when `ci_low = 0`.
    pub rate_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpReport {
    pub r: f64,
    pub rows: Vec<LdpRow>,
    /// Analytic limit when known (M/M/∞ with `g = x + c`).
    pub limit: Option<f64>,
    /// Times dropped because no path exceeded the level.
    pub dropped: Vec<f64>,
    /// Each estimated rate stays below the previous row's upper confidence
    /// rate (a diagnostic, not a theorem).
    pub trend_nonincreasing: bool,
}

impl LdpReport {
    /// Relative distance of the last estimated rate from the limit.
    pub fn relative_error_at_last(&self) -> Option<f64> {
        let limit = self.limit?;
        let last = self.rows.iter().rev().find_map(|r| r.rate)?;
        Some((last - limit).abs() / limit)
    }
}

/// Empirical `−(1/t) log ℙ(L_t(g) > r)` over a time grid.
pub fn empirical_ldp_rate(model: &ProcessModel, g: &Observable, r: f64, t_grid: &[f64], mc: &McConfig) -> Result<LdpReport> {
    mc.check()?;
    let mut sorted = t_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let samples = time_average_samples(model, g, &sorted, mc.n_paths, mc.seed, &mc.initial, mc.dt)?;
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (k, &t) in sorted.iter().enumerate() {
        let estimate = TailEstimate::from_counts(count_hits(&samples, k, r), mc.n_paths, mc.method)?;
        if estimate.hits == 0 {
            dropped.push(t);
            continue;
        }
        rows.push(LdpRow {
            t,
            rate: Some(-estimate.p_hat.ln() / t),
            rate_low: -estimate.ci_high.ln() / t,
            rate_high: if estimate.ci_low > 0.0 { -estimate.ci_low.ln() / t } else { f64::INFINITY },
            estimate,
        });
    }
    let trend_nonincreasing = rows.windows(2).all(|w| w[1].rate.unwrap_or(0.0) <= w[0].rate_high);

    let limit = match model {
        ProcessModel::BirthDeath(bd) => match (bd.spec.family, g.func()) {
            (BirthDeathFamily::MmInfinity { lambda }, crate::observable::ObservableFn::Polynomial(c))
                if c.len() == 2 && c[1] == 1.0 =>
            {
                let excess = r - (c[0] - g.shift()) - lambda;
                mminf_ldp_limit(lambda, excess).ok()
            }
            _ => None,
        },
        _ => None,
    };
    Ok(LdpReport { r, rows, limit, dropped, trend_nonincreasing })
}

/// Mean of `L_t(g)` at mesh `dt` and `dt/2`, for judging discretization error
/// against Monte Carlo error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtConsistency {
    pub dt: f64,
    pub mean_dt: f64,
    pub mean_half_dt: f64,
    /// Standard error of the difference of the two means.
    pub standard_error: f64,
    /// `|difference| ≤ 3 · standard_error`.
    pub consistent: bool,
}

pub fn dt_consistency(model: &ProcessModel, g: &Observable, t: f64, dt: f64, mc: &McConfig) -> Result<DtConsistency> {
    mc.check()?;
    if !model.is_continuous() {
        return Err(Error::Spec("dt consistency applies to diffusions".into()));
    }
    let stats = |dt: f64, seed: u64| -> Result<(f64, f64)> {
        let s = time_average_samples(model, g, &[t], mc.n_paths, seed, &mc.initial, Some(dt))?;
        let n = s.len() as f64;
        let mean = s.iter().map(|v| v[0]).sum::<f64>() / n;
        let var = s.iter().map(|v| (v[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((mean, var / n))
    };
    let (m1, v1) = stats(dt, mc.seed)?;
    let (m2, v2) = stats(dt / 2.0, mc.seed.wrapping_add(1))?;
    let se = (v1 + v2).sqrt();
    Ok(DtConsistency { dt, mean_dt: m1, mean_half_dt: m2, standard_error: se, consistent: (m1 - m2).abs() <= 3.0 * se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_models::invariant_measure;
    use statrs::distribution::{ChiSquared, Discrete, Poisson};

    fn mminf(lambda: f64) -> (BirthDeathSpec, StationaryMeasure) {
        let spec = BirthDeathSpec::mm_infinity(lambda).unwrap();
        let mu = invariant_measure(&spec, 80).unwrap();
        (spec, mu)
    }

    fn g0(lambda: f64) -> Observable {
        Observable::polynomial(vec![-lambda, 1.0])
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn constant_observable_is_exact() {
        let (spec, mu) = mminf(1.0);
        let cfg = TrajectoryConfig::new(37.0, 4, Initial::Stationary).unwrap();
        assert_eq!(simulate_bd_time_average(&spec, Some(&mu), &Observable::constant(2.5), &cfg).unwrap(), 2.5);
        let ou = ProcessModel::ou(1.0).unwrap();
        assert_eq!(simulate_diffusion_time_average(&ou, &Observable::constant(0.0), &cfg).unwrap(), 0.0);
        assert_eq!(simulate_diffusion_time_average(&ou, &Observable::constant(-1.25), &cfg).unwrap(), -1.25);
    }

    #[test]
    fn frozen_seed_is_bit_identical() {
        let (spec, mu) = mminf(1.0);
        let cfg = TrajectoryConfig::new(50.0, 123, Initial::Stationary).unwrap();
        let a = simulate_bd_time_average(&spec, Some(&mu), &g0(1.0), &cfg).unwrap();
        let b = simulate_bd_time_average(&spec, Some(&mu), &g0(1.0), &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let other = TrajectoryConfig::new(50.0, 124, Initial::Stationary).unwrap();
        assert_ne!(a, simulate_bd_time_average(&spec, Some(&mu), &g0(1.0), &other).unwrap());
    }

    #[test]
    fn results_independent_of_thread_count() {
        let (spec, mu) = mminf(1.0);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| time_average_samples(&model, &g0(1.0), &[5.0, 10.0], 500, 9, &Initial::Stationary, None).unwrap())
        };
        assert_eq!(run(1), run(4));
        let ou = ProcessModel::ou(1.0).unwrap();
        let run_ou = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| time_average_samples(&ou, &g0(1.0), &[1.0], 200, 9, &Initial::Stationary, None).unwrap())
        };
        assert_eq!(run_ou(1), run_ou(3));
    }

    #[test]
    fn event_log_matches_online_integral() {
        let (spec, mu) = mminf(2.0);
        for seed in 0..20 {
            let cfg = TrajectoryConfig::new(30.0, seed, Initial::Stationary).unwrap();
            let path = simulate_bd_path(&spec, Some(&mu), &cfg).unwrap();
            for g in [g0(2.0), Observable::polynomial(vec![0.0, 0.0, 1.0])] {
                let online = simulate_bd_time_average(&spec, Some(&mu), &g, &cfg).unwrap();
                let offline = path.time_average(&g);
                assert!((online - offline).abs() <= 1e-12 * offline.abs().max(1.0), "{online} vs {offline}");
            }
        }
    }

    #[test]
    fn stationary_start_is_preserved() {
        let lambda = 2.0;
        let (spec, mu) = mminf(lambda);
        let n = 100_000;
        let finals: Vec<usize> = (0..n as u64)
            .into_par_iter()
            .map(|seed| {
                let cfg = TrajectoryConfig::new(1.5, seed, Initial::Stationary).unwrap();
                simulate_bd_path(&spec, Some(&mu), &cfg).unwrap().final_state()
            })
            .collect();
        let pois = Poisson::new(lambda).unwrap();
        let bins = 8;
        let mut observed = vec![0usize; bins];
        for s in finals {
            observed[s.min(bins - 1)] += 1;
        }
        let mut expected: Vec<f64> = (0..bins - 1).map(|k| pois.pmf(k as u64) * n as f64).collect();
        expected.push(n as f64 - expected.iter().sum::<f64>());
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (*o as f64 - e).powi(2) / e).sum();
        let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} vs {critical}");
    }

    #[test]
    fn mminf_clt() {
        let lambda = 1.0;
        let (spec, mu) = mminf(lambda);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let t = 200.0;
        let s = time_average_samples(&model, &g0(lambda), &[t], 10_000, 2024, &Initial::Stationary, None).unwrap();
        let xs: Vec<f64> = s.iter().map(|v| v[0]).collect();
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 3.0 * (v / xs.len() as f64).sqrt());
        assert!((v * t - 2.0 * lambda).abs() < 0.1 * 2.0 * lambda, "{}", v * t);
    }

    #[test]
    fn ou_clt_and_dt_consistency() {
        let model = ProcessModel::ou(1.0).unwrap();
        let g = g0(1.0);
        let t = 50.0;
        let s = time_average_samples(&model, &g, &[t], 2000, 77, &Initial::Stationary, None).unwrap();
        let xs: Vec<f64> = s.iter().map(|v| v[0]).collect();
        let (_, v) = mean_var(&xs);
        let finite_t = 2.0 - (1.0 - (-2.0 * t).exp()) / t;
        assert!((v * t - finite_t).abs() < 0.15 * finite_t, "{}", v * t);

        let report = dt_consistency(&model, &g, 10.0, 0.02, &McConfig::new(2000, 5)).unwrap();
        assert!(report.consistent, "{report:?}");
        let quartic = ProcessModel::potential(PotentialDiffusion::power(4.0, 1).unwrap()).unwrap();
        let rep = dt_consistency(&quartic, &Observable::polynomial(vec![0.0, 0.0, 1.0]), 5.0, 0.01, &McConfig::new(1000, 6)).unwrap();
        assert!(rep.consistent, "{rep:?}");
    }

    #[test]
    fn state_cap_is_reported() {
        let runaway = BirthDeathSpec::new("runaway", |_| 100.0, |_| 1.0);
        let model = ProcessModel::birth_death(runaway, None).with_state_cap(50);
        let err = time_average_samples(&model, &Observable::identity(), &[10.0], 1, 0, &Initial::State(0), None).unwrap_err();
        assert!(matches!(err, Error::StateCap { cap: 50, .. }), "{err}");
        let plain = ProcessModel::birth_death(BirthDeathSpec::mm_infinity(1.0).unwrap(), None);
        let err = time_average_samples(&plain, &Observable::identity(), &[1.0], 1, 0, &Initial::Stationary, None).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn wilson_and_clopper_pearson_intervals() {
        for &(k, n) in &[(0usize, 100usize), (1, 100), (37, 100), (100, 100), (3, 100_000)] {
            for method in [IntervalMethod::Wilson, IntervalMethod::ClopperPearson] {
                let e = TailEstimate::from_counts(k, n, method).unwrap();
                assert!(0.0 <= e.ci_low && e.ci_low <= e.p_hat && e.p_hat <= e.ci_high && e.ci_high <= 1.0);
                assert_eq!(e.one_sided, k == 0);
            }
        }
        // Wilson by hand: k = 37, n = 100
        let e = TailEstimate::from_counts(37, 100, IntervalMethod::Wilson).unwrap();
        assert!((e.ci_low - 0.2818).abs() < 1e-4 && (e.ci_high - 0.4678).abs() < 1e-4, "{e:?}");
        // zero hits: rule of three
        let z = TailEstimate::from_counts(0, 100_000, IntervalMethod::ClopperPearson).unwrap();
        assert!((z.ci_high * 100_000.0 - 2.9957).abs() < 1e-3);
    }

    /// `ℙ(Bin(n, p) ≥ k)` by direct summation in log space.
    fn binomial_upper_tail(n: usize, k: usize, p: f64) -> f64 {
        let ln_fact = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
        let lf_n = ln_fact(n);
        (k..=n)
            .map(|j| (lf_n - ln_fact(j) - ln_fact(n - j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp())
            .sum()
    }

    #[test]
    fn clopper_pearson_matches_binomial_tails() {
        for &(k, n) in &[(1usize, 50usize), (7, 60), (20, 40)] {
            let e = TailEstimate::from_counts(k, n, IntervalMethod::ClopperPearson).unwrap();
            // lower bound: P(X ≥ k | p_low) = 0.025; upper: P(X ≤ k | p_high) = 0.025
            assert!((binomial_upper_tail(n, k, e.ci_low) - 0.025).abs() < 1e-6);
            assert!((1.0 - binomial_upper_tail(n, k + 1, e.ci_high) - 0.025).abs() < 1e-6);
        }
    }

    #[test]
    fn mc_tail_examples() {
        let (spec, mu) = mminf(1.0);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let mc = McConfig::new(2000, 31);
        let far = mc_tail_estimate(&model, &g0(1.0), 20.0, 50.0, &mc).unwrap();
        assert_eq!(far.p_hat, 0.0);
        assert!(far.ci_high < 2e-3);
        assert_eq!(Verdict::of(&far, 0.01), Verdict::Pass);
        let half = mc_tail_estimate(&model, &g0(1.0), 50.0, 0.0, &McConfig::new(20_000, 8)).unwrap();
        assert!((half.p_hat - 0.5).abs() < 0.05, "{half:?}");
        assert!(matches!(mc_tail_estimate(&model, &g0(1.0), 1.0, 0.0, &McConfig::new(0, 1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn verdict_rule() {
        let e = TailEstimate { p_hat: 0.1, hits: 10, n_paths: 100, ci_low: 0.05, ci_high: 0.17, method: IntervalMethod::Wilson, one_sided: false };
        assert_eq!(Verdict::of(&e, 0.2), Verdict::Pass);
        assert_eq!(Verdict::of(&e, 0.17), Verdict::Pass);
        assert_eq!(Verdict::of(&e, 0.1), Verdict::Inconclusive);
        assert_eq!(Verdict::of(&e, 0.04), Verdict::Fail);
    }

    #[test]
    fn validate_bound_small_grid() {
        let (spec, mu) = mminf(1.0);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let params = BernsteinParams::stationary(2.0, 1.0).unwrap();
        let mc = McConfig::new(5000, 1).with_method(IntervalMethod::ClopperPearson);
        let report = validate_bound(&model, &g0(1.0), &params, "sharp", &[20.0, 10.0], &[0.0, 0.5, 1.0], &mc).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(!report.any_fail());
        assert_eq!(report.rows[0].t, 20.0);
        assert_eq!(report.rows[0].bound, 1.0);
        // a stationary start with a prefactor above 1 is inconsistent
        let bad = BernsteinParams::new(2.0, 1.0, 2.0).unwrap();
        assert!(validate_bound(&model, &g0(1.0), &bad, "x", &[1.0], &[1.0], &mc).is_err());
    }

    #[test]
    fn undersized_constant_is_caught() {
        // Gaussian-only envelope (M = 0) against the Poisson-type tail at
        // moderate t and large r
        let (spec, mu) = mminf(1.0);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let params = BernsteinParams::stationary(2.0, 0.0).unwrap();
        let mc = McConfig::new(100_000, 3).with_method(IntervalMethod::ClopperPearson);
        let report = validate_bound(&model, &g0(1.0), &params, "gaussian", &[3.0, 5.0], &[3.0, 4.0], &mc).unwrap();
        assert!(report.any_fail(), "{:?}", report.rows);
    }

    #[test]
    fn ldp_limit_values() {
        assert!((mminf_ldp_limit(1.0, 1.0).unwrap() - 1.0 / (2f64.sqrt() + 1.0).powi(2)).abs() < 1e-15);
        assert!((mminf_ldp_limit(1.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(mminf_ldp_limit(0.0, 1.0).is_err());
    }

    #[test]
    fn ldp_rates_trend() {
        let (spec, mu) = mminf(1.0);
        let model = ProcessModel::birth_death(spec, Some(&mu));
        let report = empirical_ldp_rate(&model, &g0(1.0), 1.0, &[5.0, 10.0, 20.0], &McConfig::new(50_000, 12)).unwrap();
        assert!((report.limit.unwrap() - 0.1716).abs() < 1e-4);
        assert!(report.dropped.is_empty());
        assert!(report.trend_nonincreasing, "{report:?}");
        // finite-t rates approach the limit from above
        for row in &report.rows {
            assert!(row.rate.unwrap() > report.limit.unwrap());
        }
    }
}
