mod common;

use augopt_core::linalg::{column_span_projector, pseudoinverse, restricted_min_eigenvalue, svd, symmetric_eigen};
use augopt_core::Matrix;
use common::{gram_singular_values_sq, jacobi_eigen, synthetic};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeded(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn svd_matches_jacobi_oracle() {
    let a = seeded(5, 3, 11);
    let sd = svd(&a).unwrap();
    let oracle = gram_singular_values_sq(&a);
    for (s, o) in sd.singular_values.iter().zip(&oracle) {
        assert!((s * s - o).abs() < 1e-12, "{s} vs {o}");
    }
    assert!(sd.reconstruct().max_abs_diff(&a) <= 1e-9);
    assert_eq!(sd.rank, 3);
}

#[test]
fn svd_trivial_cases() {
    let sd = svd(&Matrix::identity(3)).unwrap();
    assert_eq!(sd.rank, 3);
    assert!(sd.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-15));
    let sd = svd(&Matrix::zeros(2, 4)).unwrap();
    assert_eq!(sd.rank, 0);
    assert!(sd.singular_values.iter().all(|&s| s == 0.0));
}

#[test]
fn pseudoinverse_of_rank_one_gram() {
    let x = Matrix::column_vector(&[1.0, 0.0]).unwrap();
    let g = x.matmul_t(&x).unwrap();
    let expected = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    assert!(pseudoinverse(&g).unwrap().max_abs_diff(&expected) < 1e-15);
    let d = Matrix::from_diag(&[2.0, 0.0]);
    assert!(pseudoinverse(&d).unwrap().max_abs_diff(&Matrix::from_diag(&[0.5, 0.0])) < 1e-15);
}

#[test]
fn projector_of_unit_outer_product() {
    let h = 0.5f64.sqrt();
    let x = Matrix::column_vector(&[h, h]).unwrap();
    let q = column_span_projector(&x.matmul_t(&x).unwrap()).unwrap();
    let expected = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    assert!(q.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn restricted_eigenvalue_full_rank_matches_dense_oracle() {
    let p = synthetic(8, 5, 2, 4);
    let mut m = p.gram.clone();
    for i in 0..8 {
        m[(i, i)] += 0.1 * 5.0;
    }
    let got = restricted_min_eigenvalue(&m, &Matrix::identity(8)).unwrap();
    let (oracle, _) = jacobi_eigen(&m);
    assert!((got - oracle[0]).abs() < 1e-12);
}

#[test]
fn restricted_eigenvalue_on_row_space_matches_oracle() {
    let p = synthetic(10, 4, 2, 9);
    let got = restricted_min_eigenvalue(&p.gram, &p.q_parallel).unwrap();
    let (oracle, _) = jacobi_eigen(&p.gram);
    // Rank 4: the smallest positive eigenvalue is the seventh in ascending order.
    assert!((got - oracle[6]).abs() < 1e-12);
    assert!((p.min_positive_eigenvalue() - oracle[6]).abs() < 1e-12);
}

#[test]
fn symmetric_eigen_matches_oracle() {
    let a = seeded(6, 6, 3);
    let s = (&a + &a.transpose()).scale(0.5);
    let (vals, vecs) = symmetric_eigen(&s).unwrap();
    let (oracle, _) = jacobi_eigen(&s);
    for (v, o) in vals.iter().zip(&oracle) {
        assert!((v - o).abs() < 1e-12);
    }
    let recon = &(&vecs * &Matrix::from_diag(&vals)) * &vecs.transpose();
    assert!(recon.max_abs_diff(&s) < 1e-12);
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..17, 1usize..17, 1usize..17, any::<u64>(), any::<bool>()).prop_map(|(r, c, k, seed, low_rank)| {
        if low_rank {
            &seeded(r, k.min(r).min(c), seed) * &seeded(k.min(r).min(c), c, seed ^ 1)
        } else {
            seeded(r, c, seed)
        }
    })
}

proptest! {
    #![proptest_config(common::proptest_config(1000))]

    #[test]
    fn penrose_identities(a in matrix_strategy()) {
        let ap = pseudoinverse(&a).unwrap();
        let scale = 1.0 + a.max_abs() * ap.max_abs();
        let tol = 1e-9 * scale * scale;
        prop_assert!((&(&a * &ap) * &a).max_abs_diff(&a) < tol);
        prop_assert!((&(&ap * &a) * &ap).max_abs_diff(&ap) < tol * (1.0 + ap.max_abs()));
        prop_assert!((&a * &ap).asymmetry() < tol);
        prop_assert!((&ap * &a).asymmetry() < tol);
    }

    #[test]
    fn projector_is_orthogonal_and_fixes_columns(a in matrix_strategy()) {
        let g = a.matmul_t(&a).unwrap().symmetrized();
        let q = column_span_projector(&g).unwrap();
        prop_assert!(q.asymmetry() < 1e-10);
        prop_assert!((&q * &q).max_abs_diff(&q) < 1e-10);
        prop_assert!((&q * &a).max_abs_diff(&a) < 1e-9 * (1.0 + a.max_abs()));
        let sd = svd(&a).unwrap();
        prop_assert!((q.trace() - sd.rank as f64).abs() < 1e-9);
    }

    #[test]
    fn singular_values_match_gram_oracle(a in matrix_strategy()) {
        let sd = svd(&a).unwrap();
        let oracle = gram_singular_values_sq(&a);
        for (s, o) in sd.singular_values.iter().zip(&oracle) {
            prop_assert!((s * s - o).abs() < 1e-12 * (1.0 + oracle[0]));
        }
        prop_assert!(sd.reconstruct().max_abs_diff(&a) < 1e-12 * (1.0 + a.max_abs()));
        let k = sd.singular_values.len();
        prop_assert!(sd.left_basis.t_matmul(&sd.left_basis).unwrap().max_abs_diff(&Matrix::identity(k)) < 1e-12);
        prop_assert!(sd.right_basis.t_matmul(&sd.right_basis).unwrap().max_abs_diff(&Matrix::identity(k)) < 1e-12);
    }

    #[test]
    fn symmetric_eigen_reconstructs(a in matrix_strategy()) {
        let g = a.matmul_t(&a).unwrap().symmetrized();
        let (vals, vecs) = symmetric_eigen(&g).unwrap();
        let recon = &(&vecs * &Matrix::from_diag(&vals)) * &vecs.transpose();
        prop_assert!(recon.max_abs_diff(&g) < 1e-12 * (1.0 + g.max_abs()));
        let (oracle, _) = jacobi_eigen(&g);
        for (v, o) in vals.iter().zip(&oracle) {
            prop_assert!((v - o).abs() < 1e-12 * (1.0 + g.max_abs()));
        }
    }
}
