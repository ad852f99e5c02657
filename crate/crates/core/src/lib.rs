//! Bernstein-type concentration bounds for time averages `(1/t)∫₀ᵗ g(X_s) ds`
//! of symmetric Markov processes.
//!
//! The crate is organised around the pieces needed to turn abstract
//! functional-inequality constants into numbers and to check them against
//! simulation:
//!
//! - [`bound_algebra`]: the Bernstein rate function, its inverse, Laplace
//!   envelopes, one-dimensional Legendre duals and tail envelopes.
//! - [`chain_models`]: birth-death chains, invariant measures, truncation.
//! - [`observable`]: real observables with centering metadata.
//! - [`spectral`]: truncated generators, spectral gaps, Schrödinger top
//!   eigenvalues, Poisson-equation solvers and asymptotic variances.
//! - [`diffusion`]: Ornstein-Uhlenbeck closed forms, potential diffusions,
//!   Euler-Maruyama and grid Lyapunov certificates.
//! - [`constants`]: every `M`-constant route, Orlicz gauge norms and the
//!   birth-death Lyapunov checks.
//! - [`simulation`]: exact path simulation, Monte Carlo tail estimates and
//!   bound validation reports.
//! - [`model_spec`], [`report`]: JSON model specs, manifests, CSV/JSON output
//!   used by the `mbern` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound_algebra;
pub mod chain_models;
pub mod constants;
pub mod diffusion;
pub mod error;
pub mod model_spec;
pub mod observable;
pub mod report;
pub mod simulation;
pub mod spectral;

pub use bound_algebra::BernsteinParams;
pub use chain_models::{BirthDeathSpec, StationaryMeasure};
pub use error::{Error, Result};
pub use observable::Observable;
