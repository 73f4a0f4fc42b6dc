//! Particle MCMC for partially observed McKean-Vlasov stochastic differential
//! equations: interacting-particle approximation of the law, bootstrap and
//! coupled (delta) particle filters, particle-marginal Metropolis-Hastings,
//! and a multilevel estimator that telescopes over discretization levels.

pub mod error;
pub mod filter;
pub mod harness;
pub mod law;
pub mod mcmc;
pub mod model;
pub mod models;
pub mod multilevel;
pub mod rng;

pub use error::{Error, Result};
