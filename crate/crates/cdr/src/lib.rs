//! Optimal binary classification under a controlled discovery rate.
//!
//! The library models joint laws of (features, label) over discrete grids and
//! discretized boxes, applies distribution-shift constructions that preserve
//! the posterior's level sets, solves the population-optimal constrained
//! classification problem exactly, fits two plug-in set estimators, and runs
//! seeded Monte Carlo experiments that measure how fast those estimators
//! approach the optimum.
//!
//! Start with the `examples/` directory, one runnable program per capability:
//!
//! - `posterior_and_sampling`: build laws, evaluate posteriors, draw samples
//! - `shift_zoo`: every shift and label-noise construction side by side
//! - `oracle_threshold`: exact optimal classifiers and their thresholds
//! - `immunity_cspd`: why the optimal set survives joint covariate shift
//!   and posterior drift
//! - `label_noise_sampling`: corrupted labels versus their induced clean law
//! - `klr_posterior`: kernel logistic regression as a posterior estimate
//! - `estimate_cdr_set`: both set estimators end to end
//! - `convergence_sweep`: an experiment plan producing a CSV of risks
//! - `assumption_checks`: the exact-level and growth-exponent diagnostics
//!
//! The `cdr` binary wraps the same capabilities behind subcommands
//! (`oracle`, `fit`, `evaluate`, `sweep`, `verify`).

pub mod density;
pub mod distribution;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod experiment;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod klr;
pub mod metrics;
pub mod monotone;
pub mod oracle;
pub mod scenario;
pub mod shift;

pub use error::{CdrError, Result};
