//! Augmentation schemes: samplers, exact moments, proxy losses and optima.

mod moments;

pub use moments::SelectorMoments;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::problem::{loss, RegressionProblem};
use crate::schedule::{ScheduleSet, StepParams};

/// Draw count for Monte Carlo fourth moments of non-Gaussian noise.
pub const MC_FALLBACK_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentationKind {
    Identity,
    AdditiveNoise,
    Minibatch,
    MinibatchWithNoise,
}

impl AugmentationKind {
    pub fn has_noise(self) -> bool {
        matches!(self, Self::AdditiveNoise | Self::MinibatchWithNoise)
    }

    pub fn has_batches(self) -> bool {
        matches!(self, Self::Minibatch | Self::MinibatchWithNoise)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::AdditiveNoise => "additive_noise",
            Self::Minibatch => "minibatch",
            Self::MinibatchWithNoise => "minibatch_noise",
        }
    }

    pub const ALL: [AugmentationKind; 4] =
        [Self::Identity, Self::AdditiveNoise, Self::Minibatch, Self::MinibatchWithNoise];
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme kind `{s}`")))
    }
}

/// Zero-mean, unit-variance noise entry distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
}

impl NoiseDistribution {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Rademacher => "rademacher",
            Self::Uniform => "uniform",
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

impl FromStr for NoiseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::InvalidParameter(format!("unknown noise distribution `{s}`"))),
        }
    }
}

/// A scheme together with the schedule driving it.
///
/// Noiseless kinds ignore any `σ²` schedule; full-batch kinds ignore the
/// batch rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationScheme {
    pub kind: AugmentationKind,
    pub noise: NoiseDistribution,
    pub schedule: ScheduleSet,
}

/// One augmented dataset `(X_t, Y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    pub x_t: Matrix,
    pub y_t: Matrix,
    pub t: usize,
}

/// Where the fourth moments of a [`MomentSet`] come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    ClosedForm,
    /// Estimated from this many draws; non-Gaussian noise only.
    MonteCarlo { samples: usize },
}

/// Moments of the augmented data at one step.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub t: usize,
    pub exx: Matrix,
    pub eyx: Matrix,
    pub var_xx: f64,
    pub var_yx: f64,
    pub source: MomentSource,
    scheme: AugmentationScheme,
    problem: RegressionProblem,
}

impl MomentSet {
    /// `Tr[Id ∘ Var(W X_tX_tᵀ − Y_tX_tᵀ)]`.
    pub fn grad_var_at(&self, w: &Matrix) -> Result<f64> {
        grad_variance_trace(&self.scheme, &self.problem, self.t, w)
    }
}

impl AugmentationScheme {
    pub fn new(kind: AugmentationKind, noise: NoiseDistribution, schedule: ScheduleSet) -> Result<Self> {
        if kind.has_noise() && schedule.sigma2.is_none() {
            return Err(Error::InvalidParameter(format!("scheme {kind} needs a sigma2 schedule")));
        }
        Ok(Self { kind, noise, schedule })
    }

    /// Schedule values as seen by this scheme.
    #[inline]
    pub fn params(&self, t: usize) -> StepParams {
        let mut p = self.schedule.eval(t);
        if !self.kind.has_noise() {
            p.sigma2 = 0.0;
        }
        if !self.kind.has_batches() {
            p.batch = self.schedule.samples();
        }
        p
    }

    /// Selector coefficients at step `t`.
    pub fn selector(&self, t: usize) -> SelectorMoments {
        let p = self.params(t);
        let n = self.schedule.samples();
        if self.kind.has_batches() {
            SelectorMoments::minibatch(n, p.batch, p.sigma2)
        } else {
            SelectorMoments::full(n, p.sigma2)
        }
    }

    /// Whether fourth moments are available in closed form.
    pub fn has_closed_form(&self) -> bool {
        !self.kind.has_noise() || self.noise == NoiseDistribution::Gaussian
    }

    /// Projector onto `V∥`, the column span of `E[X_tX_tᵀ]`.
    pub fn q_parallel(&self, problem: &RegressionProblem) -> Matrix {
        if self.kind.has_noise() {
            Matrix::identity(problem.n())
        } else {
            problem.q_parallel.clone()
        }
    }

    /// `λ_min` of `E[X_tX_tᵀ] = XXᵀ + σ_t²N·Id` restricted to `V∥`.
    pub fn lambda_min(&self, problem: &RegressionProblem, t: usize) -> f64 {
        let s2 = self.params(t).sigma2;
        if self.kind.has_noise() && s2 > 0.0 {
            problem.gram_eigenvalues()[0] + s2 * problem.samples() as f64
        } else {
            problem.min_positive_eigenvalue()
        }
    }

    /// Fills row-major buffers with `X_t` (`n×B`) and `Y_t` (`p×B`) and
    /// returns `B`.
    ///
    /// Draw order: batch indices first, then noise entries row by row.
    pub fn fill_batch<R: Rng + ?Sized>(
        &self,
        problem: &RegressionProblem,
        params: &StepParams,
        rng: &mut R,
        idx: &mut Vec<usize>,
        xt: &mut Vec<f64>,
        yt: &mut Vec<f64>,
    ) -> usize {
        let x = problem.data.x();
        let y = problem.data.y();
        let (n, big_n, p) = (problem.n(), problem.samples(), problem.p());
        let cols = if self.kind.has_batches() { params.batch } else { big_n };
        xt.resize(n * cols, 0.0);
        yt.resize(p * cols, 0.0);
        if self.kind.has_batches() {
            idx.clear();
            idx.extend((0..cols).map(|_| rng.random_range(0..big_n)));
            let c = (big_n as f64 / cols as f64).sqrt();
            for i in 0..n {
                let src = x.row(i);
                for (dst, &j) in xt[i * cols..(i + 1) * cols].iter_mut().zip(idx.iter()) {
                    *dst = c * src[j];
                }
            }
            for i in 0..p {
                let src = y.row(i);
                for (dst, &j) in yt[i * cols..(i + 1) * cols].iter_mut().zip(idx.iter()) {
                    *dst = c * src[j];
                }
            }
            if self.kind.has_noise() && params.sigma2 > 0.0 {
                let s = c * params.sigma2.sqrt();
                for v in xt.iter_mut() {
                    *v += s * self.noise.sample(rng);
                }
            }
        } else {
            xt.copy_from_slice(x.as_slice());
            yt.copy_from_slice(y.as_slice());
            if self.kind.has_noise() && params.sigma2 > 0.0 {
                let s = params.sigma2.sqrt();
                for v in xt.iter_mut() {
                    *v += s * self.noise.sample(rng);
                }
            }
        }
        cols
    }
}

/// Draws `(X_t, Y_t)`.
pub fn sample<R: Rng + ?Sized>(
    scheme: &AugmentationScheme,
    problem: &RegressionProblem,
    t: usize,
    rng: &mut R,
) -> AugmentedBatch {
    let params = scheme.params(t);
    let (mut idx, mut xt, mut yt) = (Vec::new(), Vec::new(), Vec::new());
    let cols = scheme.fill_batch(problem, &params, rng, &mut idx, &mut xt, &mut yt);
    AugmentedBatch {
        x_t: Matrix::from_vec_unchecked(problem.n(), cols, xt),
        y_t: Matrix::from_vec_unchecked(problem.p(), cols, yt),
        t,
    }
}

/// Exact moments at step `t`; fourth moments fall back to Monte Carlo for
/// non-Gaussian noise.
pub fn exact_moments(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize) -> MomentSet {
    let sel = scheme.selector(t);
    let x = problem.data.x();
    let y = problem.data.y();
    let yx = y.matmul_t(x).expect("conforming");
    let exx = sel.exx(&problem.gram);
    let eyx = sel.eyx(&yx);
    // var_yx involves only second moments of the noise, so it is exact for
    // every distribution.
    let var_yx = sel.var_yx(x, y);
    let (var_xx, source) = if scheme.has_closed_form() {
        (sel.var_xx(x, &problem.gram), MomentSource::ClosedForm)
    } else {
        let mut rng = mc_rng(t, 0);
        let mut acc = crate::stats::Welford::default();
        for _ in 0..MC_FALLBACK_SAMPLES {
            let b = sample(scheme, problem, t, &mut rng);
            let xx = b.x_t.matmul_t(&b.x_t).expect("conforming");
            acc.push((&xx - &exx).frobenius_norm_sq());
        }
        (acc.mean(), MomentSource::MonteCarlo { samples: MC_FALLBACK_SAMPLES })
    };
    MomentSet {
        t,
        exx,
        eyx,
        var_xx,
        var_yx,
        source,
        scheme: scheme.clone(),
        problem: problem.clone(),
    }
}

fn mc_rng(t: usize, salt: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(0x6d6f_6d65_6e74_7300 ^ ((t as u64) << 8) ^ salt)
}

/// `Tr[Id ∘ Var(w X_tX_tᵀ − Y_tX_tᵀ)]`, without any `η` prefactor.
pub fn grad_variance_trace(
    scheme: &AugmentationScheme,
    problem: &RegressionProblem,
    t: usize,
    w: &Matrix,
) -> Result<f64> {
    if w.shape() != (problem.p(), problem.n()) {
        return Err(shape_err("weights", w.shape(), (problem.p(), problem.n())));
    }
    let x = problem.data.x();
    let y = problem.data.y();
    if scheme.has_closed_form() {
        return Ok(scheme.selector(t).grad_var_trace(x, w, y));
    }
    let sel = scheme.selector(t);
    let resid = &w.matmul(x)? - y;
    let mean = sel.grad_mean(x, w, &resid);
    let mut rng = mc_rng(t, 1);
    let mut acc = crate::stats::Welford::default();
    for _ in 0..MC_FALLBACK_SAMPLES {
        let b = sample(scheme, problem, t, &mut rng);
        let h = (&w.matmul(&b.x_t)? - &b.y_t).matmul_t(&b.x_t)?;
        acc.push((&h - &mean).frobenius_norm_sq());
    }
    Ok(acc.mean())
}

/// Expected augmented loss: `L(W)` for noiseless schemes and
/// `L(W) + σ_t²‖W‖_F²` with noise.
pub fn proxy_loss(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize, w: &Matrix) -> Result<f64> {
    let base = loss(w, &problem.data)?;
    let s2 = scheme.params(t).sigma2;
    Ok(base + s2 * w.frobenius_norm_sq())
}

/// Minimum-norm minimizer of the proxy loss, `E[Y_tX_tᵀ]E[X_tX_tᵀ]⁺`.
pub fn proxy_optimum(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize) -> Result<Matrix> {
    let s2 = scheme.params(t).sigma2;
    if s2 > 0.0 {
        crate::problem::ridge_solution(&problem.data, s2)
    } else {
        Ok(problem.w_min.clone())
    }
}

/// Proxy optimum from the cached eigenbasis; equal to [`proxy_optimum`] up
/// to rounding.
pub(crate) fn proxy_optimum_fast(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize) -> Matrix {
    let s2 = scheme.params(t).sigma2;
    if s2 > 0.0 {
        problem.ridge_by_shift(s2 * problem.samples() as f64)
    } else {
        problem.w_min.clone()
    }
}

/// `‖W*_{t+1} − W*_t‖_F`.
pub fn xi_norm(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize) -> f64 {
    let a = scheme.params(t).sigma2;
    let b = scheme.params(t + 1).sigma2;
    if a == b {
        return 0.0;
    }
    let n = problem.samples() as f64;
    problem.ridge_gap(b * n, a * n)
}

/// Upper bound `N|σ_t² − σ_{t+1}²|·‖YXᵀ[(XXᵀ)⁺]²‖_F` on [`xi_norm`].
pub fn xi_bound(scheme: &AugmentationScheme, problem: &RegressionProblem, t: usize) -> Result<f64> {
    let a = scheme.params(t).sigma2;
    let b = scheme.params(t + 1).sigma2;
    let pinv = crate::linalg::pseudoinverse(&problem.gram)?;
    let yx = problem.data.y().matmul_t(problem.data.x())?;
    let k = yx.matmul(&pinv)?.matmul(&pinv)?;
    Ok(problem.samples() as f64 * (a - b).abs() * k.frobenius_norm())
}
