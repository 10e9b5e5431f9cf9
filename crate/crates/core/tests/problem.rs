mod common;

use augopt_core::problem::{gradient, loss, min_norm_solution, parse_matrix_csv, format_matrix_csv, ridge_solution};
use augopt_core::{Dataset, Matrix, RegressionProblem, SyntheticSpec};
use common::{single_point, synthetic};
use proptest::prelude::*;

#[test]
fn loss_examples() {
    let p = single_point();
    assert_eq!(loss(&Matrix::zeros(1, 2), &p.data).unwrap(), 4.0);
    let q = synthetic(8, 4, 4, 2);
    assert!(loss(&q.w_min, &q.data).unwrap() <= 1e-16);
    // Direct summation oracle for w = 0.
    let y = q.data.y();
    let mut s = 0.0;
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            s += y[(i, j)] * y[(i, j)];
        }
    }
    assert!((loss(&Matrix::zeros(4, 8), &q.data).unwrap() - s / 4.0).abs() < 1e-12);
}

#[test]
fn gradient_examples() {
    let p = single_point();
    let g = gradient(&Matrix::zeros(1, 2), &p.data).unwrap();
    assert_eq!(g.as_slice(), &[-4.0, 0.0]);
    let q = synthetic(10, 4, 3, 5);
    let g = gradient(&q.w_min, &q.data).unwrap();
    assert!((&g * &q.q_parallel).max_abs() < 1e-8);
}

#[test]
fn min_norm_examples() {
    let p = single_point();
    assert_eq!(p.w_min.as_slice(), &[2.0, 0.0]);
    let d = Dataset::new(p.data.x().clone(), Matrix::zeros(1, 1)).unwrap();
    assert_eq!(min_norm_solution(&d).unwrap().max_abs(), 0.0);
}

#[test]
fn min_norm_interpolates_and_matches_normal_equations() {
    let p = synthetic(16, 8, 4, 3);
    let x = p.data.x();
    assert!((&p.w_min * x).max_abs_diff(p.data.y()) < 1e-8);
    // Row-space oracle: W_min = Y (XᵀX)⁻¹ Xᵀ for full column rank X.
    let xtx = x.t_matmul(x).unwrap();
    let inv = augopt_core::linalg::pseudoinverse(&xtx).unwrap();
    let oracle = &(p.data.y() * &inv) * &x.transpose();
    assert!(oracle.max_abs_diff(&p.w_min) < 1e-9);
}

#[test]
fn ridge_examples() {
    let p = single_point();
    let w = ridge_solution(&p.data, 1.0).unwrap();
    assert!(w.max_abs_diff(&Matrix::new(1, 2, vec![1.0, 0.0]).unwrap()) < 1e-15);
    assert!(p.ridge_by_shift(1.0).max_abs_diff(&w) < 1e-15);
    assert!(ridge_solution(&p.data, 0.0).is_err());
}

#[test]
fn ridge_norm_decreases_with_penalty() {
    let p = synthetic(12, 6, 3, 8);
    let mut last = f64::INFINITY;
    for k in -3..6 {
        let n = ridge_solution(&p.data, 10f64.powi(k)).unwrap().frobenius_norm();
        assert!(n < last);
        last = n;
    }
    assert!(last < 1e-3);
}

#[test]
fn ridge_limit_is_quadratic_in_sigma() {
    let p = RegressionProblem::new(SyntheticSpec::default().generate().unwrap()).unwrap();
    let pts: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&s: &f64| {
            let gap = (&ridge_solution(&p.data, s * s).unwrap() - &p.w_min).frobenius_norm();
            (s.ln(), gap.ln())
        })
        .collect();
    let fit = augopt_core::stats::least_squares(&pts);
    assert!((fit.slope - 2.0).abs() < 0.1, "slope {}", fit.slope);
    // The eigenbasis gap agrees with the direct solve.
    let direct = (&ridge_solution(&p.data, 1e-4).unwrap() - &p.w_min).frobenius_norm();
    assert!((p.ridge_gap(1e-4 * 8.0, 0.0) - direct).abs() < 1e-10 * (1.0 + direct));
}

#[test]
fn generator_rules() {
    assert!(SyntheticSpec { n: 4, samples: 4, ..Default::default() }.generate().is_err());
    let a = SyntheticSpec::default().generate().unwrap();
    let b = SyntheticSpec::default().generate().unwrap();
    assert_eq!(a.x(), b.x());
    assert_eq!((a.n(), a.samples(), a.p()), (32, 8, 4));
}

#[test]
fn csv_rejects_garbage() {
    assert!(parse_matrix_csv("").is_err());
    assert!(parse_matrix_csv("1,2\n").is_err());
    assert!(parse_matrix_csv("# 1 2\n1,x\n").is_err());
    assert!(parse_matrix_csv("# 2 2\n1,2\n").is_err());
}

proptest! {
    #![proptest_config(common::proptest_config(256))]

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), i in 0usize..3, j in 0usize..7) {
        let d = SyntheticSpec { n: 7, samples: 3, outputs: 3, seed, label_noise: 0.1 }.generate().unwrap();
        let w = augopt_core::problem::gaussian_init(3, 7, seed ^ 5);
        let g = gradient(&w, &d).unwrap();
        let h = 1e-6;
        let mut wp = w.clone();
        wp[(i, j)] += h;
        let mut wm = w.clone();
        wm[(i, j)] -= h;
        let fd = (loss(&wp, &d).unwrap() - loss(&wm, &d).unwrap()) / (2.0 * h);
        prop_assert!((fd - g[(i, j)]).abs() < 1e-6 * (1.0 + g[(i, j)].abs()));
    }

    #[test]
    fn gradient_lies_in_row_space(seed in any::<u64>()) {
        let p = synthetic(9, 4, 2, seed);
        let w = augopt_core::problem::gaussian_init(2, 9, seed ^ 3);
        let g = gradient(&w, &p.data).unwrap();
        let perp = &Matrix::identity(9) - &p.q_parallel;
        prop_assert!((&g * &perp).max_abs() <= 1e-10);
    }

    #[test]
    fn csv_roundtrip_is_exact(seed in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let m = augopt_core::problem::gaussian_init(r, c, seed).scale(1e3);
        let back = parse_matrix_csv(&format_matrix_csv(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}
