//! Fixtures shared by the benchmarks.

use augopt_core::problem::gaussian_init;
use augopt_core::{
    AugmentationKind, AugmentationScheme, BatchRule, Matrix, NoiseDistribution, PowerLaw, RegressionProblem, ScheduleSet,
    SyntheticSpec,
};

/// Synthetic problem with `n` features, `samples` columns and 4 outputs.
pub fn problem(n: usize, samples: usize) -> RegressionProblem {
    let spec = SyntheticSpec { n, samples, outputs: 4, ..SyntheticSpec::default() };
    RegressionProblem::new(spec.generate().expect("valid spec")).expect("valid problem")
}

/// Scheme with `eta = 0.5 (t+1)^-0.5`, `sigma2 = 0.1 (t+1)^-1/3` and batches of 2.
pub fn scheme(kind: AugmentationKind, samples: usize) -> AugmentationScheme {
    let eta = PowerLaw::new(0.5, 0.5, 1).expect("valid");
    let sigma2 = kind.has_noise().then(|| PowerLaw::new(0.1, 1.0 / 3.0, 1).expect("valid"));
    let batch = if kind.has_batches() { BatchRule::Constant(2) } else { BatchRule::Full };
    let set = ScheduleSet::new(eta, sigma2, batch, samples).expect("valid schedules");
    AugmentationScheme::new(kind, NoiseDistribution::Gaussian, set).expect("valid scheme")
}

pub fn init(problem: &RegressionProblem) -> Matrix {
    gaussian_init(problem.p(), problem.n(), 7)
}
