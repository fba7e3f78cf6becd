//! Ranking monetary-policy rules by stochastic dominance.
//!
//! The crate is organised bottom-up:
//!
//! - [`lre`]: linear rational-expectations models. Assembly of the stacked
//!   system, the fixed-point solver for the state equation, unconditional
//!   covariances, simulation and the Kalman likelihood.
//! - [`model`]: the JSON model-file format and the built-in `nk3` model.
//! - [`rules`]: monetary-policy rule families and their policy blocks, plus
//!   standalone evaluators (Bitcoin supply, McCallum, money growth, China).
//! - [`uncertainty`]: priors, parameter draws and random-walk Metropolis.
//! - [`optimizer`]: welfare losses and per-draw minimisation over the
//!   coefficient box of each rule.
//! - [`dominance`]: k-order stochastic dominance, rule ranking, Omega ratio,
//!   VaR and CVaR.
//! - [`portfolio`]: portfolio dominance, efficiency search and CRRA pricing
//!   diagnostics.
//! - [`attest`]: signed economic series, policy commitments with a pluggable
//!   proof backend, and an append-only hash-chained ledger.

pub mod attest;
pub mod dominance;
pub mod expr;
pub mod lre;
pub mod model;
pub mod optimizer;
pub mod portfolio;
pub mod rng;
pub mod rules;
pub mod uncertainty;

pub use dominance::{EmpiricalDistribution, Orientation, RuleRanking, SDResult};
pub use lre::{CanonicalForm, SolvedModel, StateSpace, StructuralModel};
pub use model::ModelSpec;
pub use optimizer::{LossDistribution, OptimalDraw, PolicyProblem};
pub use rules::{PolicyBlock, RuleCoefficients, RuleFamily};
pub use uncertainty::{ParameterDraw, PosteriorSample, PriorSpec};
