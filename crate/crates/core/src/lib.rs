//! Augmented gradient descent for overparameterized linear regression.
//!
//! The crate simulates `W_{t+1} = W_t − (2η_t/N)(W_tX_t − Y_t)X_tᵀ` under
//! data augmentation (identity, additive noise, minibatches, minibatches with
//! noise), propagates the exact first and second moments of `W_t`, and
//! classifies learning-rate and noise schedules by Monro-Robbins type
//! conditions.

pub mod augmentation;
pub mod conditions;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod problem;
pub mod schedule;
pub mod stats;

pub use augmentation::{
    exact_moments, grad_variance_trace, proxy_loss, proxy_optimum, sample, xi_bound, xi_norm, AugmentationKind,
    AugmentationScheme, AugmentedBatch, MomentSet, MomentSource, NoiseDistribution, SelectorMoments,
};
pub use conditions::{
    check_general, check_scheme, classify, classify_gauss, classify_sgd, classify_sgd_noise, linear_scaling_ratio,
    matrix_product_bound, product_factor_bounds, ConditionReport, PowerLawPlan, RateForecast, RateKind, Verdict,
};
pub use diagnostics::{fit_exponential, fit_power_law, frozen_subspace_residual, validate_moments, RateFit};
pub use dynamics::{
    exact_mean_recursion, exact_variance_recursion, run_ensemble, run_trajectory, Checkpoint, EnsembleConfig,
    EnsembleStats, ExactRecursion, RecordCadence, TrajectoryRecord,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use problem::{Dataset, RegressionProblem, SyntheticSpec};
pub use schedule::{BatchRule, PowerLaw, ScheduleSet, StepParams};
