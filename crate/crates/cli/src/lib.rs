//! Experiment driver for augmented gradient descent on linear regression.
//!
//! The binary `augopt` wraps these modules; the core algorithms are
//! re-exported as [`core`].

pub use augopt_core as core;

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod validate;

pub use config::{ConfigError, ExperimentConfig, ProblemSource, RunSpec};
pub use validate::{run_suite, CriterionResult, ValidateOptions};
