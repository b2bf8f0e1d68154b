//! Black-box outer optimizers: GP Bayesian optimization and Gaussian
//! variational optimization.

pub mod bo;
pub mod gp;
pub mod vo;

pub use bo::{bo_run, expected_improvement, propose_next, BoRecord, BoState};
pub use gp::{gp_fit, matern32, GpModel};
pub use vo::{avo_run, vo_gradient, AvoConfig, AvoRecord, MixtureDivergence, MixtureEval, SearchDistribution};
