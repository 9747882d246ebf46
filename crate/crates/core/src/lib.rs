//! Two-phase adaptive submodular meta-learning.
//!
//! A policy in this crate selects `k` items in two phases: an initial set of
//! `l` items fixed at training time from a collection of training tasks, and
//! `k - l` items chosen adaptively once the incoming task is known and the
//! states of earlier selections have been observed.
//!
//! The crate is organised as:
//!
//! - [`model`]: items, realizations, priors, tasks, policies and policy execution.
//! - [`estimation`]: conditional expected marginal utilities (exact and Monte Carlo).
//! - [`policies`]: two-phase greedy, two-phase randomized greedy, the edge-regime
//!   mixtures and the baselines.
//! - [`bruteforce`]: the optimal two-phase policy oracle and property checkers.
//! - [`ic`]: Independent Cascade influence maximization with full-adoption feedback.
//! - [`harness`]: train/test experiment sweeps and CSV output.
//! - [`verify`]: random tiny-instance generators and approximation-ratio verification.
//!
//! Core math is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bruteforce;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod ic;
pub mod model;
pub mod policies;
pub mod rng;
mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use model::{
    concat, conditional_prior, expected_utility_exact, f_avg_exact, f_avg_mc, is_consistent, is_subrealization,
    run_policy, truncate, ExplicitPrior, GenerativePrior, ItemId, MixturePolicy, PartialRealization, Pick, Policy,
    Realization, Rule, StateValue, Task, TaskFlags, ToyInstance, ToyTask, Trace, TwoPhasePolicy,
};

pub use estimation::{Estimator, MarginalEstimate};

/// Toy task with `f64` utilities.
pub type Toy = ToyTask<f64>;
/// Toy instance (shared prior plus tasks) with `f64` utilities.
pub type Instance = ToyInstance<f64>;
/// Explicit prior with `f64` probabilities.
pub type Explicit = ExplicitPrior<f64>;
/// Prior over realizations with `f64` probabilities.
pub type Prior = model::Prior<f64>;
/// Composite policy with `f64` mixture weights.
pub type Policy64 = Policy<f64>;
/// Mixture policy with `f64` weights.
pub type Mixture = MixturePolicy<f64>;
/// Marginal estimate in `f64`.
pub type Estimate = MarginalEstimate<f64>;
/// Independent Cascade task with `f64` utilities.
pub type Cascade = ic::IcTask<f64>;
