//! Tail asymptotics of generalised symmetrised Dirichlet (GSD) random vectors.
//!
//! A GSD vector is `X = R·AᵀU` with a positive radius `R` independent of a
//! symmetrised Dirichlet vector `U` on the unit sphere. This crate provides
//!
//! * the density formulas of the model ([`model`]),
//! * radial laws in the Gumbel max-domain of attraction ([`radial`]),
//! * the quadratic program `min xᵀΣ⁻¹x, x ≥ b` that locates the dominating
//!   point of `{X > u·b}` ([`qp`]),
//! * the leading-order asymptotics of `P(X > u_n)` ([`asymptotics`]),
//! * exact samplers and Monte Carlo estimators used to check them ([`sampler`]).
//!
//! Index sets are 0-based throughout.

pub mod asymptotics;
pub mod error;
pub mod gof;
pub mod linalg;
pub mod model;
pub mod qp;
pub mod quadrature;
pub mod radial;
pub mod sampler;
pub mod special;

pub use asymptotics::{
    corollary2, theorem31, Branch, IndexSplit, IntegrationBackend, TailAsymptotics, TailProblem,
    ThresholdMode, ThresholdSpec,
};
pub use error::{Error, Result};
pub use model::{AlphaVector, DensityValue, KotzParams, MixingMatrix, ModelSpec};
pub use qp::{QpProblem, QpSolution};
pub use radial::RadialLaw;
pub use sampler::{Estimator, McEstimate, RngStream};
