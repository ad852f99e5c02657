//! JSON model files.
//!
//! ```json
//! {"type": "birth_death", "builtin": "mm_infinity", "lambda": 1.0}
//! {"type": "birth_death", "builtin": "subgeometric", "a": 2.0, "truncation": {"n": 2000}}
//! {"type": "birth_death", "table": [[1.0, 0.0], [2.0, 1.0], [0.0, 3.0]]}
//! {"type": "ou", "theta": 1.0}
//! {"type": "potential", "profile": {"kind": "cauchy", "beta": 1.0}, "dim": 1}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain_models::{
    center_observable, choose_truncation, invariant_measure, BirthDeathSpec, StationaryMeasure,
    DEFAULT_MAX_TRUNCATION,
};
use crate::diffusion::{radial_expectation, OUSpec, PotentialDiffusion, RadialProfile};
use crate::error::{Error, Result};
use crate::observable::{Observable, ObservableFn};
use crate::simulation::ProcessModel;

/// Truncation of an infinite chain: an explicit `n`, or the smallest `N`
/// whose tail mass bound is below `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
}

fn default_epsilon() -> f64 {
    1e-12
}

fn default_max_n() -> usize {
    DEFAULT_MAX_TRUNCATION
}

fn default_dim() -> usize {
    1
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self { n: None, epsilon: default_epsilon(), max_n: default_max_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    BirthDeath {
        #[serde(default)]
        builtin: Option<String>,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        a: Option<f64>,
        /// `(b_k, a_k)` rows of a finite chain.
        #[serde(default)]
        table: Option<Vec<(f64, f64)>>,
        #[serde(default)]
        truncation: TruncationSpec,
    },
    Ou {
        theta: f64,
    },
    Potential {
        profile: RadialProfile,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

/// A model ready for computation.
#[derive(Debug, Clone)]
pub enum Model {
    BirthDeath { spec: BirthDeathSpec, measure: StationaryMeasure },
    Ou(OUSpec),
    Potential(PotentialDiffusion),
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("model file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::BirthDeath { builtin, lambda, a, table, truncation } => {
                let spec = match (builtin.as_deref(), table) {
                    (Some(_), Some(_)) => return Err(Error::Spec("give either a builtin or a table, not both".into())),
                    (Some("mm_infinity" | "mminf"), None) => BirthDeathSpec::mm_infinity(
                        lambda.ok_or_else(|| Error::Spec("mm_infinity needs 'lambda'".into()))?,
                    )?,
                    (Some("subgeometric" | "sec6"), None) => BirthDeathSpec::subgeometric(
                        a.ok_or_else(|| Error::Spec("subgeometric chain needs 'a'".into()))?,
                    )?,
                    (Some(other), None) => return Err(Error::Spec(format!("unknown builtin chain '{other}'"))),
                    (None, Some(rows)) => BirthDeathSpec::from_table(rows)?,
                    (None, None) => return Err(Error::Spec("birth_death model needs 'builtin' or 'table'".into())),
                };
                let n = match (truncation.n, spec.max_state()) {
                    (Some(n), _) => n,
                    (None, Some(max)) => max,
                    (None, None) => choose_truncation(&spec, truncation.epsilon, truncation.max_n)?,
                };
                let measure = invariant_measure(&spec, n)?;
                Ok(Model::BirthDeath { spec, measure })
            }
            ModelSpec::Ou { theta } => Ok(Model::Ou(OUSpec::new(*theta)?)),
            ModelSpec::Potential { profile, dim } => Ok(Model::Potential(PotentialDiffusion::new(profile.clone(), *dim)?)),
        }
    }
}

/// `E[X^k]` for `X ~ N(0, θ)`.
fn gaussian_moment(k: usize, theta: f64) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product::<f64>() * theta.powi(k as i32 / 2)
}

impl Model {
    pub fn label(&self) -> String {
        match self {
            Model::BirthDeath { spec, measure } => format!("{}(N={})", spec.name, measure.truncation),
            Model::Ou(ou) => format!("ou(theta={})", ou.theta),
            Model::Potential(p) => format!("potential({:?}, d={})", p.profile, p.dim),
        }
    }

    pub fn process(&self) -> Result<ProcessModel> {
        match self {
            Model::BirthDeath { spec, measure } => Ok(ProcessModel::birth_death(spec.clone(), Some(measure))),
            Model::Ou(ou) => ProcessModel::ou(ou.theta),
            Model::Potential(p) => ProcessModel::potential(p.clone()),
        }
    }

    /// `μ(g)`. Chains use the truncated measure; OU uses Gaussian moments of
    /// polynomials; potentials integrate radially (one dimension, or `g(|x|)`
    /// in higher dimension).
    pub fn mean(&self, g: &Observable) -> Result<f64> {
        match self {
            Model::BirthDeath { measure, .. } => Ok(measure.mean_of(g)),
            Model::Ou(ou) => match g.func() {
                ObservableFn::Polynomial(c) => {
                    Ok(c.iter().enumerate().map(|(k, ck)| ck * gaussian_moment(k, ou.theta)).sum::<f64>() - g.shift())
                }
                _ => Err(Error::Capability("OU centering supports polynomial observables".into())),
            },
            Model::Potential(p) => {
                if p.dim == 1 {
                    // symmetric law: average g(r) and g(−r)
                    radial_expectation(p, |r| 0.5 * (g.eval(r) + g.eval(-r)))
                } else {
                    radial_expectation(p, |r| g.eval(r))
                }
            }
        }
    }

    /// `g − μ(g)`.
    pub fn center(&self, g: &Observable) -> Result<Observable> {
        match self {
            Model::BirthDeath { measure, .. } => Ok(center_observable(g, measure)),
            _ => Ok(g.centered_by(self.mean(g)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins_and_tables() {
        let m = ModelSpec::from_json(r#"{"type":"birth_death","builtin":"mm_infinity","lambda":1.0}"#).unwrap();
        let Model::BirthDeath { spec, measure } = m.build().unwrap() else { panic!() };
        assert_eq!(spec.name, "mm_infinity");
        assert!(measure.tail_mass_bound < 1e-12);

        let s = ModelSpec::from_json(r#"{"type":"birth_death","builtin":"sec6","a":2.0,"truncation":{"n":500}}"#).unwrap();
        let Model::BirthDeath { measure, .. } = s.build().unwrap() else { panic!() };
        assert_eq!(measure.truncation, 500);

        let t = ModelSpec::from_json(r#"{"type":"birth_death","table":[[1.0,0.0],[2.0,1.0],[0.0,3.0]]}"#).unwrap();
        let Model::BirthDeath { measure, .. } = t.build().unwrap() else { panic!() };
        // π = (1, 1, 2/3) normalized
        let z = 1.0 + 1.0 + 2.0 / 3.0;
        assert!((measure.weights[2] - (2.0 / 3.0) / z).abs() < 1e-14);

        let ou = ModelSpec::from_json(r#"{"type":"ou","theta":2.0}"#).unwrap().build().unwrap();
        assert_eq!(ou.label(), "ou(theta=2)");
        let pot = ModelSpec::from_json(r#"{"type":"potential","profile":{"kind":"subexp","beta":0.5}}"#).unwrap();
        assert!(matches!(pot.build().unwrap(), Model::Potential(PotentialDiffusion { dim: 1, .. })));
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in [
            r#"{"type":"birth_death"}"#,
            r#"{"type":"birth_death","builtin":"mm_infinity"}"#,
            r#"{"type":"birth_death","builtin":"nope","lambda":1}"#,
            r#"{"type":"ou","theta":-1}"#,
            r#"{"type":"ou"}"#,
            r#"{"type":"potential","profile":{"kind":"power","beta":2},"dim":0}"#,
            r#"not json"#,
        ] {
            let err = ModelSpec::from_json(bad).and_then(|m| m.build()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}: {err}");
        }
        let heavy = ModelSpec::from_json(r#"{"type":"birth_death","builtin":"subgeometric","a":1.5,"truncation":{"epsilon":1e-6,"max_n":2000}}"#).unwrap();
        assert!(matches!(heavy.build(), Err(Error::Truncation { .. })));
    }

    #[test]
    fn centering_per_model() {
        let g2 = Observable::polynomial(vec![0.0, 0.0, 1.0]);
        let ou = Model::Ou(OUSpec::new(2.0).unwrap());
        assert_eq!(ou.mean(&g2).unwrap(), 2.0);
        assert_eq!(ou.mean(&Observable::polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0])).unwrap(), 12.0);
        assert_eq!(ou.mean(&ou.center(&g2).unwrap()).unwrap(), 0.0);

        let pot = Model::Potential(PotentialDiffusion::quadratic(2.0, 1).unwrap());
        assert!((pot.mean(&g2).unwrap() - 2.0).abs() < 1e-6);
        assert!(pot.mean(&Observable::identity()).unwrap().abs() < 1e-12);

        let mm = ModelSpec::from_json(r#"{"type":"birth_death","builtin":"mm_infinity","lambda":3.0}"#).unwrap().build().unwrap();
        assert!((mm.mean(&Observable::identity()).unwrap() - 3.0).abs() < 1e-10);
    }
}
