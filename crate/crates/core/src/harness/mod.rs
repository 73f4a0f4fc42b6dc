//! Experiment harness: configuration, deterministic outputs, end-to-end runs,
//! and the cost-versus-MSE benchmark used to compare single-level and
//! multilevel estimators.

pub mod benchmark;
pub mod config;
pub mod experiment;
pub mod output;
