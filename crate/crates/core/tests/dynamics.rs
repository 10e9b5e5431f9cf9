mod common;

use augopt_core::augmentation::{proxy_optimum, AugmentedBatch};
use augopt_core::diagnostics::{frozen_subspace_residual, perpendicular_factor};
use augopt_core::dynamics::{run_ensemble_records, run_trajectory_partial, step, trajectory_seed};
use augopt_core::problem::gaussian_init;
use augopt_core::schedule::BatchRule;
use augopt_core::stats::Welford;
use augopt_core::{
    exact_mean_recursion, exact_variance_recursion, run_ensemble, run_trajectory, sample, AugmentationKind,
    EnsembleConfig, Error, ExactRecursion, Matrix, RecordCadence, RegressionProblem,
};
use common::{power, scheme, single_point, synthetic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn step_examples() {
    let p = single_point();
    let batch = AugmentedBatch { x_t: p.data.x().clone(), y_t: p.data.y().clone(), t: 0 };
    let w = step(&Matrix::zeros(1, 2), &batch, 0.25, 1).unwrap();
    assert_eq!(w.as_slice(), &[1.0, 0.0]);
    let w0 = Matrix::new(1, 2, vec![0.3, 0.7]).unwrap();
    assert_eq!(step(&w0, &batch, 0.0, 1).unwrap(), w0);
    let q = synthetic(8, 4, 2, 3);
    let b = AugmentedBatch { x_t: q.data.x().clone(), y_t: q.data.y().clone(), t: 0 };
    assert!(step(&q.w_min, &b, 0.3, 4).unwrap().max_abs_diff(&q.w_min) < 1e-10);
}

#[test]
fn single_step_trajectory_matches_step() {
    let q = synthetic(8, 4, 2, 3);
    let s = scheme(AugmentationKind::MinibatchWithNoise, power(0.2, 0.0), Some(power(0.1, 0.0)), BatchRule::Constant(2), 4);
    let w0 = gaussian_init(2, 8, 1);
    let rec = run_trajectory(&q, &s, &w0, 1, 42, &RecordCadence::Log2).unwrap();
    let b = sample(&s, &q, 0, &mut ChaCha8Rng::seed_from_u64(42));
    let w1 = step(&w0, &b, 0.2, 4).unwrap();
    assert!(rec.steps[0].w.max_abs_diff(&w1) < 1e-15);
}

#[test]
fn identity_runs_are_seed_independent() {
    let q = synthetic(8, 4, 2, 3);
    let s = scheme(AugmentationKind::Identity, power(0.5, 0.3), None, BatchRule::Full, 4);
    let w0 = gaussian_init(2, 8, 1);
    let a = run_trajectory(&q, &s, &w0, 300, 1, &RecordCadence::Every(50)).unwrap();
    let b = run_trajectory(&q, &s, &w0, 300, 2, &RecordCadence::Every(50)).unwrap();
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.w, y.w);
    }
}

#[test]
fn single_point_minibatch_is_full_batch_gd() {
    let p = single_point();
    let w0 = Matrix::new(1, 2, vec![0.1, -0.4]).unwrap();
    let sgd = scheme(AugmentationKind::Minibatch, power(0.3, 0.5), None, BatchRule::Constant(1), 1);
    let gd = scheme(AugmentationKind::Identity, power(0.3, 0.5), None, BatchRule::Full, 1);
    let a = run_trajectory(&p, &sgd, &w0, 100, 9, &RecordCadence::Every(10)).unwrap();
    let b = run_trajectory(&p, &gd, &w0, 100, 10, &RecordCadence::Every(10)).unwrap();
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert_eq!(x.w, y.w);
    }
}

#[test]
fn identity_ensemble_has_no_variance() {
    let q = synthetic(8, 4, 2, 3);
    let s = scheme(AugmentationKind::Identity, power(0.5, 0.3), None, BatchRule::Full, 4);
    let cfg = EnsembleConfig { t_max: 100, n_traj: 8, master_seed: 1, cadence: RecordCadence::Log2, workers: None };
    let stats = run_ensemble(&q, &s, &gaussian_init(2, 8, 1), &cfg).unwrap();
    assert!(stats.checkpoints.iter().all(|c| c.var_trace == 0.0));
}

#[test]
fn worker_count_does_not_change_statistics() {
    let q = synthetic(8, 4, 2, 3);
    let s = scheme(AugmentationKind::MinibatchWithNoise, power(0.5, 0.5), Some(power(0.1, 0.3)), BatchRule::Constant(2), 4);
    let w0 = gaussian_init(2, 8, 1);
    let run = |workers| {
        let cfg = EnsembleConfig { t_max: 200, n_traj: 37, master_seed: 5, cadence: RecordCadence::Log2, workers: Some(workers) };
        run_ensemble(&q, &s, &w0, &cfg).unwrap()
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        assert_eq!(x.mean_w, y.mean_w);
        assert_eq!(x.err_par_median.to_bits(), y.err_par_median.to_bits());
        assert_eq!(x.err_par_se.to_bits(), y.err_par_se.to_bits());
        assert_eq!(x.var_trace.to_bits(), y.var_trace.to_bits());
    }
    assert_ne!(trajectory_seed(5, 0), trajectory_seed(5, 1));
}

#[test]
fn divergence_is_reported_with_partial_record() {
    let q = synthetic(8, 4, 2, 3);
    let s = scheme(AugmentationKind::Identity, power(200.0, 0.0), None, BatchRule::Full, 4);
    let w0 = gaussian_init(2, 8, 1);
    let (rec, err) = run_trajectory_partial(&q, &s, &w0, 1000, 1, &RecordCadence::Every(1)).unwrap();
    match err {
        Some(Error::Divergence { step, last_finite_step, .. }) => {
            assert_eq!(step, last_finite_step + 1);
            assert_eq!(rec.steps.len(), last_finite_step);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
    assert!(run_trajectory(&q, &s, &w0, 1000, 1, &RecordCadence::Log2).is_err());
}

#[test]
fn frozen_subspace_for_noiseless_schemes() {
    let q = synthetic(16, 8, 4, 2);
    let w0 = gaussian_init(4, 16, 3);
    for (kind, batch) in [(AugmentationKind::Identity, BatchRule::Full), (AugmentationKind::Minibatch, BatchRule::Constant(2))] {
        let s = scheme(kind, power(0.5, 0.5), None, batch, 8);
        let rec = run_trajectory(&q, &s, &w0, 10_000, 7, &RecordCadence::Every(500)).unwrap();
        assert!(frozen_subspace_residual(&rec, &q, &s, &w0).unwrap() <= 1e-10);
    }
    let s = scheme(AugmentationKind::AdditiveNoise, power(0.5, 0.5), Some(power(0.1, 0.3)), BatchRule::Full, 8);
    let rec = run_trajectory(&q, &s, &w0, 10, 7, &RecordCadence::Log2).unwrap();
    assert!(matches!(frozen_subspace_residual(&rec, &q, &s, &w0), Err(Error::InvalidParameter(_))));
}

#[test]
fn gradient_descent_converges_to_projected_interpolant() {
    let q = synthetic(12, 6, 2, 4);
    let eta = 0.5 * 6.0 / q.gram_eigenvalues().last().unwrap();
    let s = scheme(AugmentationKind::Identity, power(eta, 0.0), None, BatchRule::Full, 6);
    let lam = q.min_positive_eigenvalue();
    let t = (20.0 / (2.0 * eta / 6.0 * lam)).ceil() as usize;
    let w0 = gaussian_init(2, 12, 8);
    let rec = run_trajectory(&q, &s, &w0, t, 0, &RecordCadence::Steps(vec![t])).unwrap();
    let perp = &Matrix::identity(12) - &q.q_parallel;
    let limit = &(&w0 * &perp) + &q.w_min;
    let scale = limit.frobenius_norm();
    assert!((&rec.steps[0].w - &limit).frobenius_norm() <= 4.0 * (-20.0f64).exp() * scale);
}

/// Exact mean and `E[(W − EW)ᵀ(W − EW)]` of noiseless minibatch GD by
/// enumerating every index path.
fn enumerate_paths(q: &RegressionProblem, batch: usize, etas: &[f64], w0: &Matrix) -> (Matrix, Matrix) {
    let big_n = q.samples();
    let per_step = big_n.pow(batch as u32);
    let total = per_step.pow(etas.len() as u32);
    let c = (big_n as f64 / batch as f64).sqrt();
    let prob = 1.0 / total as f64;
    let x = q.data.x();
    let y = q.data.y();
    let mut finals = Vec::with_capacity(total);
    for code in 0..total {
        let mut r = code;
        let mut w = w0.clone();
        for &eta in etas {
            let mut idx = Vec::with_capacity(batch);
            for _ in 0..batch {
                idx.push(r % big_n);
                r /= big_n;
            }
            let b = AugmentedBatch {
                x_t: Matrix::from_fn(q.n(), batch, |i, j| c * x[(i, idx[j])]),
                y_t: Matrix::from_fn(q.p(), batch, |i, j| c * y[(i, idx[j])]),
                t: 0,
            };
            w = step(&w, &b, eta, big_n).unwrap();
        }
        finals.push(w);
    }
    let mut mean = Matrix::zeros(q.p(), q.n());
    for w in &finals {
        mean.axpy(prob, w);
    }
    let mut z = Matrix::zeros(q.n(), q.n());
    for w in &finals {
        let d = w - &mean;
        z.axpy(prob, &d.t_matmul(&d).unwrap());
    }
    (mean, z)
}

#[test]
fn variance_recursion_matches_path_enumeration() {
    for &(n, big_n, b, steps) in &[(3usize, 2usize, 1usize, 1usize), (3, 2, 1, 6), (5, 3, 2, 3), (6, 4, 1, 4)] {
        let q = synthetic(n, big_n, 2, 40 + n as u64);
        let s = scheme(AugmentationKind::Minibatch, power(0.4, 0.5), None, BatchRule::Constant(b), big_n);
        let w0 = gaussian_init(2, n, 2);
        let etas: Vec<f64> = (0..steps).map(|t| s.params(t).eta).collect();
        let (mean, z) = enumerate_paths(&q, b, &etas, &w0);
        let states = exact_variance_recursion(&q, &s, steps, &w0).unwrap();
        let last = states.last().unwrap();
        assert!(last.mean_w.max_abs_diff(&mean) <= 1e-12, "N = {big_n}, B = {b}");
        assert!(last.z.max_abs_diff(&z) <= 1e-12, "N = {big_n}, B = {b}: {:e}", last.z.max_abs_diff(&z));
    }
}

#[test]
fn recursion_trivial_cases() {
    let q = synthetic(8, 4, 2, 3);
    let w0 = gaussian_init(2, 8, 1);
    let s = scheme(AugmentationKind::Identity, power(0.5, 0.3), None, BatchRule::Full, 4);
    let states = exact_variance_recursion(&q, &s, 50, &w0).unwrap();
    assert!(states.iter().all(|st| st.z.max_abs() == 0.0));
    let s = scheme(AugmentationKind::AdditiveNoise, power(0.5, 0.3), Some(power(0.1, 0.0)), BatchRule::Full, 4);
    let states = exact_variance_recursion(&q, &s, 3, &w0).unwrap();
    assert_eq!(states[0].z.max_abs(), 0.0);
    // Starting at the (constant) proxy optimum is a fixed point of the mean.
    let opt = proxy_optimum(&s, &q, 0).unwrap();
    let states = exact_mean_recursion(&q, &s, 30, &opt).unwrap();
    assert!(states.iter().all(|st| st.delta.max_abs() < 1e-12));
}

#[test]
fn mean_recursion_decays_geometrically_in_eigenbasis() {
    // Diagonal inputs: E[X_tX_tᵀ] = diag(λ), constant optimum.
    let x = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let y = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
    let q = RegressionProblem::new(augopt_core::Dataset::new(x, y).unwrap()).unwrap();
    let s = scheme(AugmentationKind::Identity, power(0.3, 0.4), None, BatchRule::Full, 2);
    let w0 = Matrix::new(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
    let states = exact_mean_recursion(&q, &s, 40, &w0).unwrap();
    let lambdas = [4.0, 1.0, 0.0];
    for t in [1usize, 10, 40] {
        for (j, &lam) in lambdas.iter().enumerate() {
            let factor: f64 = (0..t).map(|k| 1.0 - 2.0 * s.params(k).eta * lam / 2.0).product();
            let d0 = w0[(0, j)] - q.w_min[(0, j)];
            assert!((states[t].delta[(0, j)] - factor * d0).abs() < 1e-14);
        }
    }
}

#[test]
fn one_sided_decay_structure_holds_stepwise() {
    let q = synthetic(8, 4, 2, 13);
    let s = scheme(AugmentationKind::AdditiveNoise, power(0.5, 0.6), Some(power(0.2, 0.3)), BatchRule::Full, 4);
    let w0 = gaussian_init(2, 8, 2);
    let mut rec = ExactRecursion::new(&q, &s, &w0, false).unwrap();
    for t in 0..60 {
        let prev = rec.state().clone();
        rec.advance();
        let p = s.params(t);
        let mut exx = q.gram.clone();
        for i in 0..8 {
            exx[(i, i)] += p.sigma2 * 4.0;
        }
        let a = exx.scale(2.0 * p.eta / 4.0);
        let xi = &proxy_optimum(&s, &q, t + 1).unwrap() - &proxy_optimum(&s, &q, t).unwrap();
        let expected = &(&prev.delta - &(&prev.delta * &a)) - &xi;
        assert!(rec.state().delta.max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn ensemble_mean_matches_mean_recursion() {
    let q = synthetic(16, 8, 4, 3);
    let s = scheme(AugmentationKind::AdditiveNoise, power(0.5, 0.5), Some(power(0.1, 1.0 / 3.0)), BatchRule::Full, 8);
    let w0 = gaussian_init(4, 16, 1);
    let cfg = EnsembleConfig { t_max: 50, n_traj: 2000, master_seed: 11, cadence: RecordCadence::Steps(vec![50]), workers: None };
    let records = run_ensemble_records(&q, &s, &w0, &cfg).unwrap();
    let exact = exact_mean_recursion(&q, &s, 50, &w0).unwrap();
    let mut acc = vec![Welford::default(); 64];
    for (r, _) in &records {
        for (a, &v) in acc.iter_mut().zip(r.steps[0].w.as_slice()) {
            a.push(v);
        }
    }
    for (a, &e) in acc.iter().zip(exact[50].mean_w.as_slice()) {
        assert!((a.mean() - e).abs() <= 4.0 * a.standard_error());
    }
}

#[test]
fn perpendicular_component_contracts_by_noise_factor() {
    let q = synthetic(16, 8, 2, 5);
    let s = scheme(AugmentationKind::AdditiveNoise, power(0.5, 0.5), Some(power(0.2, 0.3)), BatchRule::Full, 8);
    let w0 = gaussian_init(2, 16, 6);
    let t = 100;
    let cfg = EnsembleConfig { t_max: t, n_traj: 1000, master_seed: 3, cadence: RecordCadence::Steps(vec![t]), workers: None };
    let records = run_ensemble_records(&q, &s, &w0, &cfg).unwrap();
    let perp = &Matrix::identity(16) - &q.q_parallel;
    let predicted = (&w0 * &perp).scale(perpendicular_factor(&s, t));
    let mut acc = vec![Welford::default(); 32];
    for (r, _) in &records {
        let wp = &r.steps[0].w * &perp;
        for (a, &v) in acc.iter_mut().zip(wp.as_slice()) {
            a.push(v);
        }
    }
    for (a, &e) in acc.iter().zip(predicted.as_slice()) {
        assert!((a.mean() - e).abs() <= 4.0 * a.standard_error() + 1e-12);
    }
}
