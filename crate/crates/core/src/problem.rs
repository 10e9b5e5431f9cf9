//! The fixed regression problem: data, loss, gradient and optima.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{cholesky_solve, column_span_projector, pseudoinverse, symmetric_eigen};
use crate::matrix::Matrix;

/// Inputs `x` (n×N) and labels `y` (p×N) with `N < n`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.cols() != y.cols() {
            return Err(Error::InvalidData(format!(
                "inputs have {} columns, labels {}",
                x.cols(),
                y.cols()
            )));
        }
        if x.cols() == 0 || y.rows() == 0 {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        if x.cols() >= x.rows() {
            return Err(Error::InvalidData(format!(
                "not overparameterized: N = {} >= n = {}",
                x.cols(),
                x.rows()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    /// Input dimension.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Sample count.
    pub fn samples(&self) -> usize {
        self.x.cols()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.y.rows()
    }

    /// Loads a dataset from two matrix CSV files (see [`read_matrix_csv`]).
    pub fn load(inputs: &Path, labels: &Path) -> Result<Self> {
        Self::new(read_matrix_csv(inputs)?, read_matrix_csv(labels)?)
    }

    pub fn save(&self, inputs: &Path, labels: &Path) -> std::io::Result<()> {
        write_matrix_csv(&self.x, inputs)?;
        write_matrix_csv(&self.y, labels)
    }
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub samples: usize,
    pub outputs: usize,
    pub seed: u64,
    /// Standard deviation of additive label noise; 0 gives consistent data.
    pub label_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 32,
            samples: 8,
            outputs: 4,
            seed: 1,
            label_noise: 0.0,
        }
    }
}

impl SyntheticSpec {
    /// `X_ij ~ N(0,1)/√n`, `Y = W_true X + noise` with `W_true` standard normal.
    pub fn generate(&self) -> Result<Dataset> {
        if self.samples >= self.n {
            return Err(Error::InvalidParameter(format!(
                "synthetic generator needs N < n (got N = {}, n = {})",
                self.samples, self.n
            )));
        }
        if !(self.label_noise >= 0.0 && self.label_noise.is_finite()) {
            return Err(Error::InvalidParameter("label noise must be >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scale = 1.0 / (self.n as f64).sqrt();
        let x = gaussian_matrix(&mut rng, self.n, self.samples, scale);
        let w_true = gaussian_matrix(&mut rng, self.outputs, self.n, 1.0);
        let mut y = w_true.matmul(&x)?;
        if self.label_noise > 0.0 {
            y.axpy(1.0, &gaussian_matrix(&mut rng, self.outputs, self.samples, self.label_noise));
        }
        Dataset::new(x, y)
    }
}

pub(crate) fn gaussian_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        scale * g
    })
}

/// Default initialization: i.i.d. `N(0, 1/n)` entries.
pub fn gaussian_init(p: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_matrix(&mut rng, p, n, 1.0 / (n as f64).sqrt())
}

/// `(1/N)‖Y − WX‖_F²`.
pub fn loss(w: &Matrix, d: &Dataset) -> Result<f64> {
    Ok(residual(w, d)?.frobenius_norm_sq() / d.samples() as f64)
}

/// `−(2/N)(Y − WX)Xᵀ`.
pub fn gradient(w: &Matrix, d: &Dataset) -> Result<Matrix> {
    let r = residual(w, d)?;
    Ok(r.matmul_t(d.x())?.scale(-2.0 / d.samples() as f64))
}

fn residual(w: &Matrix, d: &Dataset) -> Result<Matrix> {
    if w.shape() != (d.p(), d.n()) {
        return Err(shape_err("weights", w.shape(), (d.p(), d.n())));
    }
    Ok(d.y() - &w.matmul(d.x())?)
}

/// `W_min = YXᵀ(XXᵀ)⁺`.
pub fn min_norm_solution(d: &Dataset) -> Result<Matrix> {
    let gram = d.x().matmul_t(d.x())?;
    d.y().matmul_t(d.x())?.matmul(&pseudoinverse(&gram)?)
}

/// `W*_σ = YXᵀ(XXᵀ + σ²N·Id)⁻¹`, the minimizer of `loss + σ²‖W‖_F²`.
pub fn ridge_solution(d: &Dataset, sigma2: f64) -> Result<Matrix> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let n = d.n();
    let mut a = d.x().matmul_t(d.x())?;
    let shift = sigma2 * d.samples() as f64;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    // Wᵀ solves (XXᵀ + σ²N)Wᵀ = XYᵀ.
    let rhs = d.x().matmul_t(d.y())?;
    match cholesky_solve(&a, &rhs) {
        Some(wt) => Ok(wt.transpose()),
        None => {
            log::debug!("ridge: Cholesky failed at sigma2 = {sigma2:e}, using SVD");
            Ok(pseudoinverse(&a)?.matmul(&rhs)?.transpose())
        }
    }
}

/// A dataset together with its Gram matrix, projector and optima.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub data: Dataset,
    /// `XXᵀ`.
    pub gram: Matrix,
    /// Projector onto the column span of `XXᵀ`.
    pub q_parallel: Matrix,
    pub w_min: Matrix,
    /// Eigenvalues of the Gram matrix, ascending.
    gram_eigenvalues: Vec<f64>,
    gram_eigenvectors: Matrix,
    /// `YXᵀV` for the Gram eigenbasis `V`.
    yx_rotated: Matrix,
}

impl RegressionProblem {
    pub fn new(data: Dataset) -> Result<Self> {
        let gram = data.x().matmul_t(data.x())?.symmetrized();
        let q_parallel = column_span_projector(&gram)?;
        let w_min = min_norm_solution(&data)?;
        let (gram_eigenvalues, gram_eigenvectors) = symmetric_eigen(&gram)?;
        let yx_rotated = data.y().matmul_t(data.x())?.matmul(&gram_eigenvectors)?;
        Ok(Self {
            data,
            gram,
            q_parallel,
            w_min,
            gram_eigenvalues: gram_eigenvalues.into_iter().map(|v| v.max(0.0)).collect(),
            gram_eigenvectors,
            yx_rotated,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn samples(&self) -> usize {
        self.data.samples()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.gram_eigenvalues
    }

    /// Smallest strictly positive eigenvalue of `XXᵀ`.
    pub fn min_positive_eigenvalue(&self) -> f64 {
        let tol = self.n() as f64 * f64::EPSILON * self.gram_eigenvalues.last().copied().unwrap_or(0.0);
        self.gram_eigenvalues
            .iter()
            .copied()
            .find(|&v| v > tol)
            .unwrap_or(0.0)
    }

    /// `‖W*(s1) − W*(s2)‖_F` for ridge shifts `s = σ²N`, computed in the
    /// Gram eigenbasis. A shift of 0 means `W_min`.
    pub fn ridge_gap(&self, s1: f64, s2: f64) -> f64 {
        let inv = |lam: f64, s: f64| if lam + s > 0.0 && (s > 0.0 || lam > self.rank_tol()) { 1.0 / (lam + s) } else { 0.0 };
        let mut acc = 0.0;
        for (j, &lam) in self.gram_eigenvalues.iter().enumerate() {
            let f = inv(lam, s1) - inv(lam, s2);
            if f == 0.0 {
                continue;
            }
            for i in 0..self.p() {
                let b = self.yx_rotated[(i, j)];
                acc += b * b * f * f;
            }
        }
        acc.sqrt()
    }

    fn rank_tol(&self) -> f64 {
        self.n() as f64 * f64::EPSILON * self.gram_eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Ridge optimum for shift `s = σ²N` via the cached eigenbasis.
    pub fn ridge_by_shift(&self, s: f64) -> Matrix {
        let n = self.n();
        let scaled = Matrix::from_fn(self.p(), n, |i, j| {
            let lam = self.gram_eigenvalues[j];
            let f = if s > 0.0 || lam > self.rank_tol() { 1.0 / (lam + s) } else { 0.0 };
            self.yx_rotated[(i, j)] * f
        });
        scaled.matmul_t(&self.gram_eigenvectors).expect("conforming shapes")
    }
}

/// Reads a matrix from CSV: a `# rows cols` header line, then one
/// comma-separated line per row.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text).map_err(|e| match e {
        Error::InvalidData(msg) => Error::InvalidData(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty file".into()))?;
    let dims: Vec<usize> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::InvalidData("line 1: expected `# rows cols` header".into()))?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidData(format!("line 1: bad header: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::InvalidData("line 1: expected `# rows cols` header".into()));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidData(format!("line {}: {e}", idx + 1)))?;
        if row.len() != cols {
            return Err(Error::InvalidData(format!(
                "line {}: {} values, expected {cols}",
                idx + 1,
                row.len()
            )));
        }
        data.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::InvalidData(format!("{seen} rows, header says {rows}")));
    }
    Matrix::new(rows, cols, data)
}

pub fn format_matrix_csv(m: &Matrix) -> String {
    let mut out = format!("# {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_matrix_csv(m: &Matrix, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, format_matrix_csv(m))
}
