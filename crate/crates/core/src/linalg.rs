//! Decompositions, pseudoinverse, projectors and restricted eigenvalues.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Symmetry tolerance for inputs that must be symmetric, relative to the
/// largest entry.
pub const SYMMETRY_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `m = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub left_basis: Matrix,
    /// `cols × k` with orthonormal columns.
    pub right_basis: Matrix,
    pub rank: usize,
    pub rank_tolerance: f64,
}

impl SpectralData {
    pub fn reconstruct(&self) -> Matrix {
        let k = self.singular_values.len();
        let us = Matrix::from_fn(self.left_basis.rows(), k, |i, j| {
            self.left_basis[(i, j)] * self.singular_values[j]
        });
        us.matmul_t(&self.right_basis).expect("consistent factors")
    }
}

fn require_finite(m: &Matrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidMatrix("non-finite entries".into()))
    }
}

fn require_symmetric(m: &Matrix, what: &str) -> Result<()> {
    require_finite(m)?;
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!("{what}: not square")));
    }
    if m.asymmetry() > SYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(Error::InvalidMatrix(format!(
            "{what}: asymmetric (deviation {:e})",
            m.asymmetry()
        )));
    }
    Ok(())
}

/// Singular value decomposition with the standard rank cutoff
/// `max(rows, cols) · ε · s_max`.
pub fn svd(m: &Matrix) -> Result<SpectralData> {
    require_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SpectralData {
            singular_values: Vec::new(),
            left_basis: Matrix::zeros(rows, 0),
            right_basis: Matrix::zeros(cols, 0),
            rank: 0,
            rank_tolerance: 0.0,
        });
    }
    let (singular_values, left_basis, right_basis) = if rows >= cols {
        hestenes(m)
    } else {
        let (s, u, v) = hestenes(&m.transpose());
        (s, v, u)
    };
    let s_max = singular_values[0];
    let rank_tolerance = rows.max(cols) as f64 * f64::EPSILON * s_max;
    let rank = singular_values.iter().filter(|&&s| s > rank_tolerance).count();
    Ok(SpectralData {
        singular_values,
        left_basis,
        right_basis,
        rank,
        rank_tolerance,
    })
}

/// One-sided Jacobi SVD of a tall matrix (`rows >= cols`): singular values
/// descending with thin left and right bases.
fn hestenes(m: &Matrix) -> (Vec<f64>, Matrix, Matrix) {
    let (rows, cols) = m.shape();
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols).map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = u.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s_max = norms[order[0]];
    let tiny = rows as f64 * f64::EPSILON * s_max;
    // Left vectors of tiny singular values are inaccurate, so the basis is
    // re-orthogonalized in descending order (moving the reconstruction by
    // O(ε·s_max)); numerically zero columns get an orthonormal completion.
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for &j in &order {
        let mut cand: Vec<f64> = if norms[j] > tiny { u[j].iter().map(|x| x / norms[j]).collect() } else { vec![0.0; rows] };
        orthogonalize(&mut cand, &left);
        let mut nrm = dot(&cand, &cand).sqrt();
        if !(nrm > 0.1) {
            let (best, best_norm) = (0..rows)
                .map(|e| {
                    let mut c = vec![0.0; rows];
                    c[e] = 1.0;
                    orthogonalize(&mut c, &left);
                    let n = dot(&c, &c).sqrt();
                    (c, n)
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("rows > 0");
            cand = best;
            nrm = best_norm;
        }
        cand.iter_mut().for_each(|c| *c /= nrm);
        left.push(cand);
    }
    let values = order.iter().map(|&j| norms[j]).collect();
    let left_basis = Matrix::from_fn(rows, cols, |i, j| left[j][i]);
    let right_basis = Matrix::from_fn(cols, cols, |i, j| v[order[j]][i]);
    (values, left_basis, right_basis)
}

/// Two passes of modified Gram-Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for col in basis {
            let d = dot(col, v);
            v.iter_mut().zip(col).for_each(|(c, x)| *c -= d * x);
        }
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (a, b) = cols.split_at_mut(q);
    for (x, y) in a[p].iter_mut().zip(b[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Moore-Penrose pseudoinverse via the SVD rank cutoff.
pub fn pseudoinverse(m: &Matrix) -> Result<Matrix> {
    let sd = svd(m)?;
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(cols, rows);
    for r in 0..sd.rank {
        let inv = 1.0 / sd.singular_values[r];
        for i in 0..cols {
            let vi = sd.right_basis[(i, r)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..rows {
                out[(i, j)] += vi * sd.left_basis[(j, r)];
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    require_symmetric(m, "symmetric_eigen")?;
    let n = m.rows();
    let dec = nalgebra::SymmetricEigen::new(m.symmetrized().to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| dec.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Orthogonal projector onto the column span of a symmetric PSD matrix.
pub fn column_span_projector(m: &Matrix) -> Result<Matrix> {
    require_symmetric(m, "column_span_projector")?;
    let sd = svd(m)?;
    let n = m.rows();
    let basis = Matrix::from_fn(n, sd.rank, |i, j| sd.left_basis[(i, j)]);
    let q = basis.matmul_t(&basis)?;
    Ok(q.symmetrized())
}

/// Orthonormal basis (as columns) of the range of a projector.
pub(crate) fn projector_basis(q: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = symmetric_eigen(q)?;
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    Ok(Matrix::from_fn(q.rows(), cols.len(), |i, j| vecs[(i, cols[j])]))
}

/// Smallest eigenvalue of `m` restricted to the range of the projector `q`.
///
/// Returns 0 when `q = 0`.
pub fn restricted_min_eigenvalue(m: &Matrix, q: &Matrix) -> Result<f64> {
    require_symmetric(m, "restricted_min_eigenvalue")?;
    require_symmetric(q, "restricted_min_eigenvalue projector")?;
    if m.shape() != q.shape() {
        return Err(Error::InvalidMatrix("m and q differ in shape".into()));
    }
    let qq = q * q;
    if qq.max_abs_diff(q) > 1e-8 {
        return Err(Error::InvalidMatrix("q is not idempotent".into()));
    }
    let commutator = &(q * m) - &(m * q);
    if commutator.max_abs() > 1e-8 * m.max_abs().max(1.0) {
        return Err(Error::InvalidMatrix("q does not commute with m".into()));
    }
    let basis = projector_basis(q)?;
    if basis.cols() == 0 {
        return Ok(0.0);
    }
    let restricted = basis.t_matmul(&(m * &basis))?.symmetrized();
    let (vals, _) = symmetric_eigen(&restricted)?;
    Ok(vals[0])
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.singular_values.first().copied().unwrap_or(0.0))
}

/// Solves `a z = rhs` for symmetric positive-definite `a` by Cholesky.
/// Returns `None` when the factorization breaks down.
pub fn cholesky_solve(a: &Matrix, rhs: &Matrix) -> Option<Matrix> {
    let chol = nalgebra::Cholesky::new(a.to_nalgebra())?;
    let z = chol.solve(&rhs.to_nalgebra());
    let z = Matrix::from_nalgebra(&z);
    z.is_finite().then_some(z)
}
