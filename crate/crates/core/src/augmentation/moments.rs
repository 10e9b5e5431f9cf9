//! Closed-form moments of augmented data.
//!
//! Every implemented scheme has the form `X_t = c (X A + σ G)`,
//! `Y_t = c Y A`, with `A` an `N×k` selector and `G` an `n×k` noise matrix
//! with i.i.d. standard normal entries independent of `A`. Identity and pure
//! noise use `A = Id` (`k = N`, `c = 1`); minibatches draw `k = B` one-hot
//! columns uniformly with replacement and use `c = √(N/B)`. All moments below
//! only need
//!
//! ```text
//! E[AAᵀ]          = a1·Id
//! E[AAᵀ Z AAᵀ]    = d·diag(Z) + e·Z
//! ```
//!
//! plus Isserlis' theorem for the Gaussian part.

use crate::matrix::Matrix;

/// Selector and noise coefficients for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorMoments {
    /// `c²`.
    pub c2: f64,
    pub a1: f64,
    /// Coefficient of `diag(Z)` in `E[AAᵀZAAᵀ]`.
    pub d: f64,
    /// Coefficient of `Z` in `E[AAᵀZAAᵀ]`.
    pub e: f64,
    /// Number of noise columns.
    pub k: f64,
    pub sigma2: f64,
}

impl SelectorMoments {
    /// Full batch, optional noise.
    pub fn full(samples: usize, sigma2: f64) -> Self {
        Self { c2: 1.0, a1: 1.0, d: 0.0, e: 1.0, k: samples as f64, sigma2 }
    }

    /// `B` columns drawn with replacement out of `N`.
    pub fn minibatch(samples: usize, batch: usize, sigma2: f64) -> Self {
        let n = samples as f64;
        let b = batch as f64;
        Self {
            c2: n / b,
            a1: b / n,
            d: b / n,
            e: b * (b - 1.0) / (n * n),
            k: b,
            sigma2,
        }
    }

    fn c4(&self) -> f64 {
        self.c2 * self.c2
    }

    /// `E[X_tX_tᵀ] = c²(a1·XXᵀ + σ²k·Id)`.
    pub fn exx(&self, gram: &Matrix) -> Matrix {
        let mut m = gram.scale(self.c2 * self.a1);
        let shift = self.c2 * self.sigma2 * self.k;
        for i in 0..m.rows() {
            m[(i, i)] += shift;
        }
        m
    }

    /// `E[Y_tX_tᵀ] = c²a1·YXᵀ`.
    pub fn eyx(&self, yx: &Matrix) -> Matrix {
        yx.scale(self.c2 * self.a1)
    }

    /// `E[X_tX_tᵀ Z X_tX_tᵀ]` for symmetric `Z`.
    pub fn fourth_moment_map(&self, x: &Matrix, gram: &Matrix, z: &Matrix) -> Matrix {
        let n = x.rows();
        let s2 = self.sigma2;
        let xzx = x.t_matmul(&(z * x)).expect("conforming");
        let mut inner = xzx.scale(self.e);
        for i in 0..inner.rows() {
            inner[(i, i)] += self.d * xzx[(i, i)];
        }
        let mut out = x.matmul(&inner).expect("conforming").matmul_t(x).expect("conforming");
        if s2 != 0.0 {
            let pz = gram * z;
            let zp = z * gram;
            let tr_z = z.trace();
            let tr_pz = pz.trace();
            let w = s2 * self.a1;
            out.axpy(w * (self.k + 1.0), &pz);
            out.axpy(w * (self.k + 1.0), &zp);
            out.axpy(w * tr_z, gram);
            out.axpy(s2 * s2 * self.k * (self.k + 1.0), z);
            for i in 0..n {
                out[(i, i)] += w * tr_pz + s2 * s2 * self.k * tr_z;
            }
        }
        out.scale(self.c4()).symmetrized()
    }

    /// `E[H_tᵀH_t]` for `H_t = (m X_t − Y_t) X_tᵀ`, with `resid = mX − Y`.
    pub fn grad_second_moment(&self, x: &Matrix, gram: &Matrix, m: &Matrix, resid: &Matrix) -> Matrix {
        let n = x.rows();
        let s2 = self.sigma2;
        let mtm_small = resid.t_matmul(resid).expect("conforming");
        let mut inner = mtm_small.scale(self.e);
        for i in 0..inner.rows() {
            inner[(i, i)] += self.d * mtm_small[(i, i)];
        }
        let mut out = x.matmul(&inner).expect("conforming").matmul_t(x).expect("conforming");
        if s2 != 0.0 {
            let w = s2 * self.a1;
            let mxt = resid.matmul_t(x).expect("conforming");
            let cross = m.t_matmul(&mxt).expect("conforming");
            let mtm = m.t_matmul(m).expect("conforming");
            let m_norm = m.frobenius_norm_sq();
            out.axpy(w * (self.k + 1.0), &cross);
            out.axpy(w * (self.k + 1.0), &cross.transpose());
            out.axpy(w * m_norm, gram);
            out.axpy(s2 * s2 * self.k * (self.k + 1.0), &mtm);
            let diag = w * resid.frobenius_norm_sq() + s2 * s2 * self.k * m_norm;
            for i in 0..n {
                out[(i, i)] += diag;
            }
        }
        out.scale(self.c4()).symmetrized()
    }

    /// `E[H_t] = c²(a1·MXᵀ + σ²k·m)`.
    pub fn grad_mean(&self, x: &Matrix, m: &Matrix, resid: &Matrix) -> Matrix {
        let mut h = resid.matmul_t(x).expect("conforming").scale(self.a1);
        h.axpy(self.sigma2 * self.k, m);
        h.scale(self.c2)
    }

    /// `Tr[Id ∘ Var(H_t)] = E‖H_t‖² − ‖E H_t‖²` evaluated through traces.
    pub fn grad_var_trace(&self, x: &Matrix, m: &Matrix, y: &Matrix) -> f64 {
        let n = x.rows() as f64;
        let s2 = self.sigma2;
        let resid = &m.matmul(x).expect("conforming") - y;
        let mxt = resid.matmul_t(x).expect("conforming");
        let col_sq = |a: &Matrix, j: usize| (0..a.rows()).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>();
        let diag_term: f64 = (0..x.cols()).map(|j| col_sq(&resid, j) * col_sq(x, j)).sum();
        let m_norm = m.frobenius_norm_sq();
        let tr_p = x.frobenius_norm_sq();
        let mut second = self.d * diag_term + self.e * mxt.frobenius_norm_sq();
        if s2 != 0.0 {
            second += s2
                * self.a1
                * (n * resid.frobenius_norm_sq() + 2.0 * (self.k + 1.0) * m.inner(&mxt) + m_norm * tr_p);
            second += s2 * s2 * (self.k * (self.k + 1.0) * m_norm + self.k * n * m_norm);
        }
        second *= self.c4();
        let mut mean = mxt.scale(self.a1);
        mean.axpy(s2 * self.k, m);
        let first = self.c4() * mean.frobenius_norm_sq();
        (second - first).max(0.0)
    }

    /// `E‖X_tX_tᵀ − E[X_tX_tᵀ]‖_F²`.
    pub fn var_xx(&self, x: &Matrix, gram: &Matrix) -> f64 {
        let n = x.rows() as f64;
        let s2 = self.sigma2;
        let k = self.k;
        let col4: f64 = (0..x.cols())
            .map(|j| {
                let c: f64 = (0..x.rows()).map(|i| x[(i, j)] * x[(i, j)]).sum();
                c * c
            })
            .sum();
        let p2 = gram.frobenius_norm_sq();
        let tr_p = gram.trace();
        let fourth = self.d * col4
            + self.e * p2
            + s2 * self.a1 * (2.0 * k + 2.0 + 2.0 * n) * tr_p
            + s2 * s2 * k * n * (k + n + 1.0);
        let second = self.a1 * self.a1 * p2 + 2.0 * self.a1 * s2 * k * tr_p + s2 * s2 * k * k * n;
        (self.c4() * (fourth - second)).max(0.0)
    }

    /// `E‖Y_tX_tᵀ − E[Y_tX_tᵀ]‖_F²`.
    pub fn var_yx(&self, x: &Matrix, y: &Matrix) -> f64 {
        let m = Matrix::zeros(y.rows(), x.rows());
        self.grad_var_trace(x, &m, y)
    }

    /// `E[Y_tX_tᵀX_tY_tᵀ] = c⁴[Y(d·diag(XᵀX) + e·XᵀX)Yᵀ + σ²n·a1·YYᵀ]`.
    pub fn e_yxxy(&self, x: &Matrix, y: &Matrix) -> Matrix {
        let n = x.rows() as f64;
        let inner = self.selector_inner(&x.t_matmul(x).expect("conforming"));
        let mut out = y.matmul(&inner).expect("conforming").matmul_t(y).expect("conforming");
        out.axpy(self.sigma2 * n * self.a1, &y.matmul_t(y).expect("conforming"));
        out.scale(self.c4())
    }

    /// `E[Y_tX_tᵀX_tX_tᵀ] = c⁴[Y(d·diag(XᵀX) + e·XᵀX)Xᵀ + σ²(n+k+1)a1·YXᵀ]`.
    pub fn e_yxxx(&self, x: &Matrix, y: &Matrix) -> Matrix {
        let n = x.rows() as f64;
        let inner = self.selector_inner(&x.t_matmul(x).expect("conforming"));
        let mut out = y.matmul(&inner).expect("conforming").matmul_t(x).expect("conforming");
        out.axpy(self.sigma2 * (n + self.k + 1.0) * self.a1, &y.matmul_t(x).expect("conforming"));
        out.scale(self.c4())
    }

    /// `E[AAᵀ Z AAᵀ] = d·diag(Z) + e·Z` (no `c` factors).
    pub fn selector_inner(&self, z: &Matrix) -> Matrix {
        let mut out = z.scale(self.e);
        for i in 0..out.rows() {
            out[(i, i)] += self.d * z[(i, i)];
        }
        out
    }
}
