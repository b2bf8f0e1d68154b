//! Tuning black-box stochastic generators by divergence minimization.
//!
//! The library estimates how far a parameterized generator sits from a
//! ground-truth sample by training discriminators, and drives the generator's
//! parameters toward the nominal configuration with sample-budget-aware
//! black-box optimizers. Alongside the plain Jensen-Shannon estimate it
//! implements *adaptive divergences*: capacity-scheduled estimators that
//! spend weak, cheap discriminators while the distributions are far apart
//! and only pay for full capacity near the optimum.
//!
//! Main layers:
//! - [`sim`]: seeded synthetic generators (rotated mixture, spiral roll, toy
//!   detector), all charging a [`BudgetLedger`].
//! - [`gbdt`] / [`nn`]: the discriminator backends and their capacity
//!   schedules.
//! - [`divergence`]: the family contract, grid-search adaptive divergence,
//!   and the train/validation-gap sample-size search.
//! - [`opt`]: Gaussian-process Bayesian optimization and variational
//!   optimization.
//! - [`harness`]: config-driven repeated experiments with CSV artifacts.

pub mod budget;
pub mod capacity;
pub mod dataset;
pub mod divergence;
pub mod error;
pub mod gbdt;
pub mod harness;
pub mod loss;
pub mod nn;
pub mod opt;
pub mod optim;
pub mod rng;
pub mod sim;

pub use budget::BudgetLedger;
pub use capacity::CapacityFunction;
pub use dataset::Dataset;
pub use divergence::{
    estimate_ad_grid, estimate_jsd, min_training_size, DivergenceEstimate, Estimator, FamilyKind,
    GapCriterion, GrowthPolicy, Probe, PseudoDivergenceFamily, Sampler, SizeSearch, Trainer,
};
pub use error::{Error, Result};
pub use rng::Rng;
