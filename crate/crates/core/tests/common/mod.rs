#![allow(dead_code)]

use augopt_core::schedule::{BatchRule, PowerLaw, ScheduleSet};
use augopt_core::{AugmentationKind, AugmentationScheme, Dataset, Matrix, NoiseDistribution, RegressionProblem, SyntheticSpec};

/// Cyclic Jacobi eigensolver for symmetric matrices; eigenvalues ascending,
/// eigenvectors as columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = Matrix::from_fn(n, n, |i, j| v[i][order[j]]);
    (vals, vecs)
}

/// Squared singular values, descending, from the Jacobi eigenvalues of the
/// smaller Gram matrix.
pub fn gram_singular_values_sq(a: &Matrix) -> Vec<f64> {
    let g = if a.rows() >= a.cols() { a.t_matmul(a).unwrap() } else { a.matmul_t(a).unwrap() };
    let (mut vals, _) = jacobi_eigen(&g.symmetrized());
    vals.reverse();
    vals
}

pub fn synthetic(n: usize, samples: usize, outputs: usize, seed: u64) -> RegressionProblem {
    let d = SyntheticSpec { n, samples, outputs, seed, label_noise: 0.0 }.generate().unwrap();
    RegressionProblem::new(d).unwrap()
}

/// `X = (1, 0)ᵀ`, `Y = (2)`.
pub fn single_point() -> RegressionProblem {
    let d = Dataset::new(Matrix::column_vector(&[1.0, 0.0]).unwrap(), Matrix::new(1, 1, vec![2.0]).unwrap()).unwrap();
    RegressionProblem::new(d).unwrap()
}

pub fn power(c: f64, e: f64) -> PowerLaw {
    PowerLaw::new(c, e, 1).unwrap()
}

pub fn scheme(
    kind: AugmentationKind,
    eta: PowerLaw,
    sigma2: Option<PowerLaw>,
    batch: BatchRule,
    samples: usize,
) -> AugmentationScheme {
    let s = ScheduleSet::new(eta, sigma2, batch, samples).unwrap();
    AugmentationScheme::new(kind, NoiseDistribution::Gaussian, s).unwrap()
}

pub fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b)
}

pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases, failure_persistence: None, ..Default::default() }
}
