mod common;

use augopt_core::conditions::{check_general, product_factor_bounds, StepMoments};
use augopt_core::diagnostics::product_norm_monte_carlo;
use augopt_core::linalg::spectral_norm;
use augopt_core::problem::gaussian_init;
use augopt_core::schedule::{growth_exponent, BatchRule, PowerLaw, ScheduleSet};
use augopt_core::{
    check_scheme, classify, classify_gauss, classify_sgd_noise, linear_scaling_ratio,
    matrix_product_bound, AugmentationKind, Matrix, PowerLawPlan, RateKind, Verdict,
};
use common::{power, proptest_config, scheme, synthetic};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn plan(x: f64, y: f64, kind: AugmentationKind) -> PowerLawPlan {
    PowerLawPlan::new(x, y, kind, BatchRule::Constant(2)).unwrap()
}

fn sched(x: f64, y: f64, samples: usize) -> ScheduleSet {
    ScheduleSet::new(power(1.0, x), Some(power(0.1, y)), BatchRule::Constant(2), samples).unwrap()
}

fn unit_moments(_: usize) -> StepMoments {
    StepMoments { lambda_min: 1.0, var_xx: 1.0, var_yx: 1.0, grad_var_at_mean: Some(1.0) }
}

#[test]
fn general_check_agrees_with_gauss_classifier_on_grid() {
    let problem = synthetic(4, 3, 2, 11);
    let w0 = gaussian_init(2, 4, 3);
    for &x in &GRID {
        for &y in &GRID {
            let s = scheme(AugmentationKind::AdditiveNoise, power(1.0, x), Some(power(0.1, y)), BatchRule::Full, 3);
            let general = check_scheme(&problem, &s, &w0, 256).unwrap();
            let closed = classify_gauss(&plan(x, y, AugmentationKind::AdditiveNoise)).unwrap();
            assert_eq!(general.verdict, closed.verdict, "(x, y) = ({x}, {y})");
            match (general.forecast, closed.forecast) {
                (Some(a), Some(b)) => {
                    assert_eq!(a.kind, RateKind::PowerLaw);
                    assert!((a.exponent - b.exponent).abs() < 1e-12, "({x}, {y}): {} vs {}", a.exponent, b.exponent);
                }
                (None, None) => {}
                (a, b) => panic!("({x}, {y}): forecasts differ {a:?} vs {b:?}"),
            }
        }
    }
}

#[test]
fn general_check_is_sufficient_for_minibatch_classifiers() {
    for kind in [AugmentationKind::Minibatch, AugmentationKind::MinibatchWithNoise] {
        for &x in &GRID {
            for &y in &GRID {
                let y = if kind.has_noise() { y } else { 0.0 };
                let p = plan(x, y, kind);
                let general = check_general(unit_moments, |_| 0.0, &sched(x, y, 4), Some(&p), 64);
                let closed = classify(&p).unwrap();
                if general.verdict.is_convergent() {
                    assert!(closed.verdict.is_convergent(), "{kind} ({x}, {y})");
                }
            }
        }
    }
    // Large learning rates are covered by the dedicated theorem only.
    let p = plan(0.45, 0.2, AugmentationKind::MinibatchWithNoise);
    assert!(classify_sgd_noise(&p).unwrap().verdict.is_convergent());
    assert!(!check_general(unit_moments, |_| 0.0, &sched(0.45, 0.2, 4), Some(&p), 64).verdict.is_convergent());
}

#[test]
fn gauss_example_series_growth() {
    let problem = synthetic(4, 3, 2, 5);
    let w0 = gaussian_init(2, 4, 9);
    let s = scheme(AugmentationKind::AdditiveNoise, power(1.0, 0.65), Some(power(0.1, 1.0 / 3.0)), BatchRule::Full, 3);
    let horizon = 100_000;
    let report = check_scheme(&problem, &s, &w0, horizon).unwrap();
    assert_eq!(report.verdict, Verdict::GuaranteedConvergent);
    for c in report.conditions.iter().filter(|c| c.required) {
        assert!(c.status.is_symbolic() && c.status.holds(), "{}: {}", c.name, c.evidence);
    }
    let lambda = growth_exponent(|t| s.params(t).eta * s.lambda_min(&problem, t), horizon);
    assert!(lambda.exponent > 0.0, "{lambda:?}");
    let x = problem.data.x();
    let var = growth_exponent(
        |t| {
            let sel = s.selector(t);
            s.params(t).eta.powi(2) * (sel.var_xx(x, &problem.gram) + sel.var_yx(x, problem.data.y()))
        },
        horizon,
    );
    assert!(var.exponent < 0.0, "{var:?}");
}

#[test]
fn minibatch_drift_series_is_zero() {
    let problem = synthetic(5, 4, 1, 2);
    let s = scheme(AugmentationKind::Minibatch, power(0.5, 0.5), None, BatchRule::Constant(2), 4);
    let report = check_scheme(&problem, &s, &gaussian_init(1, 5, 1), 128).unwrap();
    let mr2 = report.condition("mr2_sum_xi_converges").unwrap();
    assert!(mr2.status.holds());
    for t in 0..128 {
        assert_eq!(augopt_core::xi_norm(&s, &problem, t), 0.0);
    }
}

#[test]
fn constant_schedule_fails_variance_condition_heuristically() {
    let eta = PowerLaw::constant(0.1).unwrap();
    let s2 = PowerLaw::constant(0.2).unwrap();
    let schedules = ScheduleSet::new(eta, Some(s2), BatchRule::Full, 3).unwrap();
    let moments = |_| StepMoments { lambda_min: 0.6, var_xx: 1.5, var_yx: 0.5, grad_var_at_mean: Some(2.0) };
    let report = check_general(moments, |_| 0.0, &schedules, None, 4096);
    let mr3 = report.condition("mr3_variance_summable").unwrap();
    assert!(!mr3.status.is_symbolic());
    assert!(!mr3.status.holds());
    assert_eq!(report.verdict, Verdict::NotGuaranteed);
    let mr2 = report.condition("mr2_sum_xi_converges").unwrap();
    assert!(mr2.status.holds());
}

#[test]
fn heuristics_never_certify() {
    let schedules = ScheduleSet::new(
        power(1.0, 0.6),
        Some(power(1.0, 0.3)),
        BatchRule::PowerLaw { coefficient: 2.0, exponent: -0.1, offset: 1 },
        50,
    )
    .unwrap();
    let report = check_general(unit_moments, |t| (t as f64 + 1.0).powi(-2), &schedules, None, 1024);
    assert_eq!(report.verdict, Verdict::NotGuaranteed);
    assert!(report.conditions.iter().all(|c| !c.status.is_symbolic()));
}

#[test]
fn product_bound_trivial_cases() {
    assert_eq!(matrix_product_bound(&[], &[], 3.0).unwrap(), (9.0, 0.0));
    let (m, f) = matrix_product_bound(&[0.5, 0.8], &[0.0, 0.0], 2.0).unwrap();
    assert!((m - 0.25 * 0.64 * 4.0).abs() < 1e-15);
    assert_eq!(f, 0.0);
    assert!(matrix_product_bound(&[0.0], &[0.1], 1.0).is_err());
    assert!(matrix_product_bound(&[1.0], &[-0.1], 1.0).is_err());
    assert!(matrix_product_bound(&[1.0, 1.0], &[0.1], 1.0).is_err());
}

fn product_trial(n: usize, samples: usize, steps: usize, kind: AugmentationKind, mc: usize, seed: u64) {
    let problem = synthetic(n, samples, 1, seed);
    let sigma2 = 0.05;
    let lmax = spectral_norm(&problem.gram).unwrap();
    let eta = 0.25 * samples as f64 / (lmax + sigma2 * samples as f64);
    let batch = if kind.has_batches() { BatchRule::Constant(samples.div_ceil(2)) } else { BatchRule::Full };
    let s = scheme(kind, power(eta, 0.3), Some(power(sigma2, 0.2)), batch, samples);
    let (a, b2) = product_factor_bounds(&problem, &s, steps).unwrap();
    let (mean_bound, fluct_bound) = matrix_product_bound(&a, &b2, 1.0).unwrap();
    let (mean, fluct) = product_norm_monte_carlo(&problem, &s, steps, mc, seed ^ 0x5a5a).unwrap();
    assert!(mean <= mean_bound, "n={n} N={samples} L={steps} {kind}: {mean} > {mean_bound}");
    assert!(fluct <= fluct_bound, "n={n} N={samples} L={steps} {kind}: {fluct} > {fluct_bound}");
}

#[test]
fn product_bound_dominates_monte_carlo_in_seeded_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let n = rng.random_range(2..=8);
        let samples = rng.random_range(1..n);
        let steps = rng.random_range(1..=100);
        let kind = if trial % 2 == 0 { AugmentationKind::AdditiveNoise } else { AugmentationKind::MinibatchWithNoise };
        product_trial(n, samples, steps, kind, 500, trial);
    }
}

#[test]
fn product_bound_dominates_at_larger_dimensions() {
    product_trial(10, 6, 30, AugmentationKind::AdditiveNoise, 300, 1);
    product_trial(100, 20, 5, AugmentationKind::AdditiveNoise, 60, 2);
}

fn minibatch(eta: f64, batch: usize, samples: usize) -> augopt_core::AugmentationScheme {
    scheme(AugmentationKind::Minibatch, power(eta, 0.0), None, BatchRule::Constant(batch), samples)
}

#[test]
fn linear_scaling_examples() {
    let problem = synthetic(6, 4, 2, 8);
    let r = linear_scaling_ratio(&problem, &minibatch(0.1, 2, 4), &problem.w_min, 0).unwrap();
    assert!(r.ratio.abs() < 1e-20, "{r:?}");

    let w = gaussian_init(2, 6, 4);
    let r1 = linear_scaling_ratio(&problem, &minibatch(0.1, 1, 4), &w, 0).unwrap();
    let r2 = linear_scaling_ratio(&problem, &minibatch(0.2, 2, 4), &w, 0).unwrap();
    assert!((r1.bound - r2.bound).abs() <= 1e-14 * r1.bound);

    let base = linear_scaling_ratio(&problem, &minibatch(0.1, 1, 4), &w, 0).unwrap();
    for b in [1usize, 2, 4] {
        let r = linear_scaling_ratio(&problem, &minibatch(0.1, b, 4), &w, 0).unwrap();
        let scaled = r.ratio * b as f64 / base.ratio;
        assert!((scaled - 1.0).abs() < 0.1, "B = {b}: {scaled}");
        assert!(r.within_bound(), "B = {b}: {r:?}");
    }
    let noisy = scheme(AugmentationKind::AdditiveNoise, power(0.1, 0.0), Some(power(0.1, 0.0)), BatchRule::Full, 4);
    assert!(linear_scaling_ratio(&problem, &noisy, &w, 0).is_err());
}

proptest! {
    #![proptest_config(proptest_config(256))]

    #[test]
    fn gauss_verdict_monotone_in_x(x in 0.01f64..0.99, y in 0.01f64..0.99, shrink in 0.0f64..1.0) {
        let hi = classify_gauss(&plan(x, y, AugmentationKind::AdditiveNoise)).unwrap();
        prop_assume!(hi.verdict.is_convergent());
        let x2 = x - shrink * (x - (1.0 - y) / 2.0).max(0.0);
        let lo = classify_gauss(&plan(x2, y, AugmentationKind::AdditiveNoise)).unwrap();
        prop_assert!(2.0 * x2 + y <= 1.0 || lo.verdict.is_convergent());
    }

    #[test]
    fn convergent_forecasts_are_positive(x in 0.0f64..1.5, y in 0.0f64..1.5, k in 0usize..3) {
        let kind = [AugmentationKind::AdditiveNoise, AugmentationKind::Minibatch, AugmentationKind::MinibatchWithNoise][k];
        let r = classify(&plan(x, y, kind)).unwrap();
        if r.verdict.is_convergent() {
            prop_assert!(r.forecast.unwrap().exponent > 0.0);
            prop_assert!(r.conditions.iter().filter(|c| c.required).all(|c| c.status.is_symbolic() && c.status.holds()));
        }
    }

    #[test]
    fn general_convergent_implies_classifier(x in 0.0f64..1.5, y in 0.0f64..1.5, k in 0usize..3) {
        let kind = [AugmentationKind::AdditiveNoise, AugmentationKind::Minibatch, AugmentationKind::MinibatchWithNoise][k];
        let y = if kind.has_noise() { y } else { 0.0 };
        let p = plan(x, y, kind);
        let g = check_general(unit_moments, |_| 0.0, &sched(x, y, 4), Some(&p), 32);
        if g.verdict.is_convergent() {
            prop_assert!(classify(&p).unwrap().verdict.is_convergent());
        }
    }

    #[test]
    fn linear_scaling_ratio_within_bound(seed in 0u64..10_000, eta in 0.01f64..1.0, b in 1usize..=3) {
        let problem = synthetic(5, 3, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Matrix::from_fn(2, 5, |_, _| rng.random_range(-2.0..2.0));
        let r = linear_scaling_ratio(&problem, &minibatch(eta, b, 3), &w, 0).unwrap();
        prop_assert!(r.within_bound(), "{:?}", r);
    }
}
