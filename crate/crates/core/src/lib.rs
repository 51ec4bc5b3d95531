//! Importance sampling for path-dependent options under Heston dynamics.
//!
//! Drift schedules come from small-noise, small-time and moderate-deviation
//! approximations of the variational problem `sup_h log G(h) - 0.5 |h|^2`, from a
//! Black-Scholes reduction, or from a direct discretised solve ([`varopt`]).

pub mod bench;
pub mod cli;
pub mod config;
pub mod drift_bs;
pub mod drift_ldp;
pub mod drift_mdp;
pub mod error;
pub mod measure;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod payoff;
pub mod rng;
pub mod sim;
pub mod varopt;

pub use error::{Error, Result};
pub use model::{HestonParams, TimeGrid};
pub use payoff::{PayoffKind, PayoffSpec};
