//! Real observables on the state space, with centering metadata.
//!
//! Chain states are evaluated at `n as f64`, so the same observable can be
//! used on `ℕ` and on `ℝ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the underlying (uncentered) function.
#[derive(Clone)]
pub enum ObservableFn {
    /// `Σ cₖ xᵏ`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// Values on `0..len`; states past the table reuse the last entry.
    Table(Vec<f64>),
    /// `min(inner(x), upper)`.
    Clamp { inner: Box<ObservableFn>, upper: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ObservableFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ObservableFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            ObservableFn::Table(v) => {
                if v.is_empty() {
                    return 0.0;
                }
                let idx = if x <= 0.0 { 0 } else { (x.round() as usize).min(v.len() - 1) };
                v[idx]
            }
            ObservableFn::Clamp { inner, upper } => inner.eval(x).min(*upper),
            ObservableFn::Custom(f) => f(x),
        }
    }

    fn describe(&self) -> String {
        match self {
            ObservableFn::Polynomial(c) => {
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, &ck)| ck != 0.0)
                    .map(|(k, ck)| match k {
                        0 => format!("{ck}"),
                        1 => format!("{ck}*x"),
                        _ => format!("{ck}*x^{k}"),
                    })
                    .collect();
                if terms.is_empty() {
                    "0".to_string()
                } else {
                    terms.join(" + ")
                }
            }
            ObservableFn::Table(v) => format!("table[{}]", v.len()),
            ObservableFn::Clamp { inner, upper } => format!("min({}, {upper})", inner.describe()),
            ObservableFn::Custom(_) => "custom".to_string(),
        }
    }
}

impl fmt::Debug for ObservableFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Clone, Debug)]
pub struct Observable {
    func: ObservableFn,
    /// Constant subtracted from `func`; `μ(func)` once centered.
    shift: f64,
    /// Cached `μ(g)` of the uncentered function under the centering measure.
    pub mean_under: Option<f64>,
    pub centered: bool,
}

impl Observable {
    pub fn new(func: ObservableFn) -> Self {
        Self { func, shift: 0.0, mean_under: None, centered: false }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(ObservableFn::Polynomial(coeffs))
    }

    /// `g(x) = x`.
    pub fn identity() -> Self {
        Self::polynomial(vec![0.0, 1.0])
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    pub fn table(values: Vec<f64>) -> Self {
        Self::new(ObservableFn::Table(values))
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(ObservableFn::Custom(Arc::new(f)))
    }

    /// `min(g, upper)`, keeping the current shift outside the clamp.
    pub fn clamped(&self, upper: f64) -> Self {
        let base = self.clone();
        Self::new(ObservableFn::Custom(Arc::new(move |x| base.eval(x).min(upper))))
    }

    pub fn func(&self) -> &ObservableFn {
        &self.func
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.func.eval(x) - self.shift
    }

    #[inline]
    pub fn at_state(&self, n: usize) -> f64 {
        self.eval(n as f64)
    }

    /// Values on the chain states `0..=n_max`.
    pub fn values(&self, n_max: usize) -> Vec<f64> {
        (0..=n_max).map(|n| self.at_state(n)).collect()
    }

    /// Scale by `c`: `(c·g)` with shift scaled accordingly.
    pub fn scaled(&self, c: f64) -> Self {
        let base = self.clone();
        let mut out = Self::new(ObservableFn::Custom(Arc::new(move |x| c * base.eval(x))));
        out.centered = self.centered;
        out.mean_under = self.mean_under.map(|m| c * m);
        out
    }

    /// Subtract a known mean. Repeated calls compose, so centering an
    /// already-centered observable with its (zero) mean is a no-op.
    pub fn centered_by(&self, mean: f64) -> Self {
        let mut out = self.clone();
        out.shift += mean;
        out.mean_under = Some(self.mean_under.unwrap_or(mean));
        out.centered = true;
        out
    }

    /// Ensure the values are finite on `0..=n_max`.
    pub fn check_finite(&self, n_max: usize) -> Result<()> {
        for n in 0..=n_max {
            let v = self.at_state(n);
            if !v.is_finite() {
                return Err(Error::domain(format!("observable is not finite at state {n}: {v}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        if self.shift == 0.0 {
            self.func.describe()
        } else {
            format!("{} - {}", self.func.describe(), self.shift)
        }
    }
}

/// Serializable observable description used by model files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    Polynomial(Vec<f64>),
    Table(Vec<f64>),
    Clamp { inner: Box<ObservableSpec>, upper: f64 },
}

impl ObservableSpec {
    /// Parse the CLI shorthand: `n`, `x`, `identity`, `n^2`, `x^2`,
    /// `poly:c0,c1,...`, `table:v0,v1,...`, `min:K:<inner>`, or inline JSON.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            return Ok(serde_json::from_str(t)?);
        }
        let parse_list = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Spec(format!("bad number '{v}' in observable: {e}")))
                })
                .collect()
        };
        match t {
            "n" | "x" | "identity" => return Ok(ObservableSpec::Polynomial(vec![0.0, 1.0])),
            "n^2" | "x^2" | "square" => return Ok(ObservableSpec::Polynomial(vec![0.0, 0.0, 1.0])),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("poly:") {
            return Ok(ObservableSpec::Polynomial(parse_list(rest)?));
        }
        if let Some(rest) = t.strip_prefix("table:") {
            return Ok(ObservableSpec::Table(parse_list(rest)?));
        }
        if let Some(rest) = t.strip_prefix("min:") {
            let (k, inner) = rest
                .split_once(':')
                .ok_or_else(|| Error::Spec("min observable needs 'min:K:<inner>'".into()))?;
            let upper = k
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Spec(format!("bad clamp level '{k}': {e}")))?;
            return Ok(ObservableSpec::Clamp { inner: Box::new(Self::parse(inner)?), upper });
        }
        Err(Error::Spec(format!("unrecognized observable '{t}'")))
    }

    fn to_fn(&self) -> ObservableFn {
        match self {
            ObservableSpec::Polynomial(c) => ObservableFn::Polynomial(c.clone()),
            ObservableSpec::Table(v) => ObservableFn::Table(v.clone()),
            ObservableSpec::Clamp { inner, upper } => {
                ObservableFn::Clamp { inner: Box::new(inner.to_fn()), upper: *upper }
            }
        }
    }

    pub fn build(&self) -> Observable {
        Observable::new(self.to_fn())
    }

    /// Polynomial coefficients when the observable is a plain polynomial.
    pub fn polynomial_coeffs(&self) -> Option<&[f64]> {
        match self {
            ObservableSpec::Polynomial(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_bounded_above(&self) -> bool {
        match self {
            ObservableSpec::Clamp { .. } => true,
            ObservableSpec::Table(_) => true,
            ObservableSpec::Polynomial(c) => {
                let deg = c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                deg == 0
            }
        }
    }
}
