//! Rate fits and Monte-Carlo checks of the closed-form theory.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augmentation::{sample, AugmentationKind, AugmentationScheme, SelectorMoments};
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problem::{gaussian_init, RegressionProblem};
use crate::stats::{least_squares, Welford};

/// Errors below this are treated as the floating-point floor.
pub const ERROR_FLOOR: f64 = 1e-13;

/// Fraction of leading checkpoints dropped by [`default_window`].
pub const TRANSIENT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitKind {
    PowerLaw,
    /// `log e_t` against `t^{1−x}`.
    Exponential { x: f64 },
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw => f.write_str("power-law"),
            Self::Exponential { x } => write!(f, "exponential-in-t^(1-{x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub kind: FitKind,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last `t` actually used.
    pub window: (f64, f64),
    pub points: usize,
}

impl fmt::Display for RateFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} fit: slope {:.6}, intercept {:.6}, r2 {:.6}, window [{}, {}], {} points",
            self.kind, self.slope, self.intercept, self.r_squared, self.window.0, self.window.1, self.points
        )
    }
}

/// Drops the first 10% of checkpoints and everything from the first error
/// at or below [`ERROR_FLOOR`] on. Returns an inclusive `t` range.
pub fn default_window(series: &[(f64, f64)]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 0.0);
    }
    let skip = (series.len() as f64 * TRANSIENT_FRACTION).floor() as usize;
    let start = series[skip.min(series.len() - 1)].0;
    let end = series
        .iter()
        .position(|&(_, e)| e <= ERROR_FLOOR)
        .map_or(series[series.len() - 1].0, |i| if i == 0 { series[0].0 } else { series[i - 1].0 });
    (start, end)
}

fn windowed(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window.unwrap_or_else(|| default_window(series));
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < 5 {
        return Err(Error::InvalidData(format!("need at least 5 points in window [{lo}, {hi}], got {}", pts.len())));
    }
    if let Some(&(t, e)) = pts.iter().find(|&&(t, e)| !(e > 0.0 && e.is_finite()) || !(t > 0.0)) {
        return Err(Error::InvalidData(format!("nonpositive or non-finite value {e} at t = {t}")));
    }
    Ok(pts)
}

fn finish(kind: FitKind, pts: &[(f64, f64)], transformed: Vec<(f64, f64)>) -> RateFit {
    let fit = least_squares(&transformed);
    RateFit {
        kind,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
    }
}

/// Least squares of `log e_t` on `log t`; `None` uses [`default_window`].
pub fn fit_power_law(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<RateFit> {
    let pts = windowed(series, window)?;
    let tr = pts.iter().map(|&(t, e)| (t.ln(), e.ln())).collect();
    Ok(finish(FitKind::PowerLaw, &pts, tr))
}

/// Least squares of `log e_t` on `t^{1−x}`.
pub fn fit_exponential(series: &[(f64, f64)], x: f64, window: Option<(f64, f64)>) -> Result<RateFit> {
    if !(x.is_finite() && x < 1.0) {
        return Err(Error::InvalidParameter(format!("exponential fit needs x < 1, got {x}")));
    }
    let pts = windowed(series, window)?;
    let tr = pts.iter().map(|&(t, e)| (t.powf(1.0 - x), e.ln())).collect();
    Ok(finish(FitKind::Exponential { x }, &pts, tr))
}

/// `max_t ‖(W_t − W_0)(Id − Q∥)‖_F` over recorded checkpoints.
pub fn frozen_subspace_residual(
    record: &TrajectoryRecord,
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
) -> Result<f64> {
    if scheme.kind.has_noise() {
        return Err(Error::InvalidParameter(format!(
            "{} moves the perpendicular component by design",
            scheme.kind
        )));
    }
    let perp = &Matrix::identity(problem.n()) - &problem.q_parallel;
    let mut worst = 0.0_f64;
    for c in &record.steps {
        worst = worst.max((&(&c.w - w0) * &perp).frobenius_norm());
    }
    Ok(worst)
}

/// `∏_{s<t}(1 − 2η_sσ_s²)`, the contraction of `E[W_t](Id − Q∥)` under
/// additive noise.
pub fn perpendicular_factor(scheme: &AugmentationScheme, t: usize) -> f64 {
    (0..t)
        .map(|s| {
            let p = scheme.params(s);
            1.0 - 2.0 * p.eta * p.sigma2
        })
        .product()
}

/// Monte-Carlo `(E‖Z_L‖₂², E‖Z_L − E Z_L‖₂²)` for
/// `Z_L = ∏_{t<L}(Id − (2η_t/N)X_tX_tᵀ) Z_0` with `Z_0 = Id`, where `E Z_L`
/// is the exact product of the expected factors.
pub fn product_norm_monte_carlo(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = problem.n();
    let big_n = problem.samples() as f64;
    let mut mean_prod = Matrix::identity(n);
    for t in 0..steps {
        let c = 2.0 * scheme.params(t).eta / big_n;
        let mut ey = Matrix::identity(n);
        ey.axpy(-c, &scheme.selector(t).exx(&problem.gram));
        mean_prod = &ey * &mean_prod;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut norm, mut fluct) = (Welford::default(), Welford::default());
    for _ in 0..samples {
        let mut z = Matrix::identity(n);
        for t in 0..steps {
            let c = 2.0 * scheme.params(t).eta / big_n;
            let b = sample(scheme, problem, t, &mut rng);
            let xx = b.x_t.matmul_t(&b.x_t)?;
            z.axpy(-c, &(&xx * &z));
        }
        norm.push(crate::linalg::spectral_norm(&z)?.powi(2));
        fluct.push(crate::linalg::spectral_norm(&(&z - &mean_prod))?.powi(2));
    }
    Ok((norm.mean(), fluct.mean()))
}

/// Monte-Carlo estimate of one scalar statistic against its closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub name: String,
    pub exact: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentValidation {
    pub samples: usize,
    pub scores: Vec<ZScore>,
}

impl MomentValidation {
    pub fn max_abs_z(&self) -> f64 {
        self.scores.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    /// Largest `|z|` among statistics whose name starts with `prefix`.
    pub fn max_abs_z_for(&self, prefix: &str) -> f64 {
        self.scores
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .map(|s| s.z.abs())
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ZScore> {
        self.scores.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
    }
}

fn z_score(exact: f64, estimate: f64, se: f64) -> f64 {
    let diff = estimate - exact;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * (1.0 + exact.abs()) {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

struct MatrixAcc {
    name: &'static str,
    exact: Matrix,
    acc: Vec<Welford>,
}

impl MatrixAcc {
    fn new(name: &'static str, exact: Matrix) -> Self {
        let acc = vec![Welford::default(); exact.as_slice().len()];
        Self { name, exact, acc }
    }

    fn push(&mut self, m: &Matrix) {
        for (a, &v) in self.acc.iter_mut().zip(m.as_slice()) {
            a.push(v);
        }
    }

    fn scores(&self, out: &mut Vec<ZScore>) {
        let cols = self.exact.cols();
        for (i, a) in self.acc.iter().enumerate() {
            let exact = self.exact.as_slice()[i];
            let se = a.standard_error();
            out.push(ZScore {
                name: format!("{}[{},{}]", self.name, i / cols, i % cols),
                exact,
                estimate: a.mean(),
                standard_error: se,
                z: z_score(exact, a.mean(), se),
            });
        }
    }
}

/// Weight matrix at which gradient moments are validated.
pub fn validation_weights(problem: &RegressionProblem, master_seed: u64) -> Matrix {
    let mut w = gaussian_init(problem.p(), problem.n(), master_seed ^ 0x7761_6974);
    w.axpy(1.0, &problem.w_min);
    w
}

/// Monte-Carlo z-scores of every closed-form moment at step `t`.
pub fn validate_moments(
    scheme: &AugmentationScheme,
    problem: &RegressionProblem,
    t: usize,
    n_samples: usize,
    master_seed: u64,
) -> Result<MomentValidation> {
    validate_moments_with(scheme, problem, t, n_samples, master_seed, &scheme.selector(t))
}

/// As [`validate_moments`], with the closed forms taken from `sel` instead
/// of the scheme's own coefficients.
pub fn validate_moments_with(
    scheme: &AugmentationScheme,
    problem: &RegressionProblem,
    t: usize,
    n_samples: usize,
    master_seed: u64,
    sel: &SelectorMoments,
) -> Result<MomentValidation> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {n_samples}")));
    }
    let x = problem.data.x();
    let y = problem.data.y();
    let gram = &problem.gram;
    let yx = y.matmul_t(x)?;
    let w = validation_weights(problem, master_seed);
    let resid = &w.matmul(x)? - y;
    let closed = scheme.has_closed_form();
    let id = Matrix::identity(problem.n());
    let xtx = x.t_matmul(x)?;

    let exx = sel.exx(gram);
    let eyx = sel.eyx(&yx);
    let eh = sel.grad_mean(x, &w, &resid);
    let mut mats = vec![MatrixAcc::new("exx", exx.clone()), MatrixAcc::new("eyx", eyx.clone())];
    if closed {
        mats.push(MatrixAcc::new("exxxx", sel.fourth_moment_map(x, gram, &id)));
        mats.push(MatrixAcc::new("eyxxy", sel.e_yxxy(x, y)));
        mats.push(MatrixAcc::new("eyxxx", sel.e_yxxx(x, y)));
        mats.push(MatrixAcc::new("ehth", sel.grad_second_moment(x, gram, &w, &resid)));
    }
    let var_yx = sel.var_yx(x, y);
    let var_xx = sel.var_xx(x, gram);
    let grad_var = sel.grad_var_trace(x, &w, y);
    let (mut a_var_xx, mut a_var_yx, mut a_grad) = (Welford::default(), Welford::default(), Welford::default());

    let batches = scheme.kind.has_batches();
    let big_n = problem.samples();
    let mut sel_acc = MatrixAcc::new("selector", sel.selector_inner(&xtx));
    let mut counts = vec![0.0; big_n];

    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    for _ in 0..n_samples {
        let b = sample(scheme, problem, t, &mut rng);
        let xx = b.x_t.matmul_t(&b.x_t)?;
        let yxt = b.y_t.matmul_t(&b.x_t)?;
        let h = &(&w * &xx) - &yxt;
        mats[0].push(&xx);
        mats[1].push(&yxt);
        if closed {
            let xxxx = &xx * &xx;
            let yxxt = b.y_t.matmul_t(&b.x_t)?;
            mats[2].push(&xxxx);
            mats[3].push(&yxxt.matmul_t(&yxxt)?);
            mats[4].push(&(&yxxt * &xx));
            mats[5].push(&h.t_matmul(&h)?);
            a_var_xx.push((&xx - &exx).frobenius_norm_sq());
            a_grad.push((&h - &eh).frobenius_norm_sq());
        }
        a_var_yx.push((&yxt - &eyx).frobenius_norm_sq());

        if batches {
            counts.iter_mut().for_each(|c| *c = 0.0);
            let batch = scheme.params(t).batch;
            for _ in 0..batch {
                counts[rng.random_range(0..big_n)] += 1.0;
            }
            let m = Matrix::from_fn(big_n, big_n, |i, j| counts[i] * counts[j] * xtx[(i, j)]);
            sel_acc.push(&m);
        } else {
            sel_acc.push(&xtx);
        }
    }

    let mut scores = Vec::new();
    for m in &mats {
        m.scores(&mut scores);
    }
    sel_acc.scores(&mut scores);
    let mut scalar = |name: &str, exact: f64, a: &Welford| {
        let se = a.standard_error();
        scores.push(ZScore { name: name.into(), exact, estimate: a.mean(), standard_error: se, z: z_score(exact, a.mean(), se) });
    };
    scalar("var_yx", var_yx, &a_var_yx);
    if closed {
        scalar("var_xx", var_xx, &a_var_xx);
        scalar("grad_var", grad_var, &a_grad);
    }
    Ok(MomentValidation { samples: n_samples, scores })
}

/// Exact expectations of a noiseless minibatch by enumerating all `N^B`
/// equally likely index tuples.
#[derive(Debug, Clone)]
pub struct EnumeratedMoments {
    pub exx: Matrix,
    pub eyx: Matrix,
    /// `E[AAᵀZAAᵀ]`.
    pub selector: Matrix,
    /// `E[X_tX_tᵀZX_tX_tᵀ]`.
    pub fourth: Matrix,
    pub e_yxxy: Matrix,
    pub e_yxxx: Matrix,
    pub var_xx: f64,
    pub var_yx: f64,
    pub grad_var: f64,
}

/// Enumerates all index tuples of a size-`batch` minibatch. `z` is `N×N`
/// for the selector moment and `n×n` for the fourth moment map; `w` is the
/// point of the gradient variance.
pub fn enumerate_minibatch(
    problem: &RegressionProblem,
    batch: usize,
    z_samples: &Matrix,
    z_features: &Matrix,
    w: &Matrix,
) -> Result<EnumeratedMoments> {
    let big_n = problem.samples();
    let total = (big_n as u64).checked_pow(batch as u32).filter(|&v| v <= 1 << 20);
    let Some(total) = total else {
        return Err(Error::InvalidParameter(format!("N^B too large to enumerate ({big_n}^{batch})")));
    };
    let (n, p) = (problem.n(), problem.p());
    let x = problem.data.x();
    let y = problem.data.y();
    let c = (big_n as f64 / batch as f64).sqrt();
    let prob = 1.0 / total as f64;
    let mut exx = Matrix::zeros(n, n);
    let mut eyx = Matrix::zeros(p, n);
    let mut selector = Matrix::zeros(big_n, big_n);
    let mut fourth = Matrix::zeros(n, n);
    let mut e_yxxy = Matrix::zeros(p, p);
    let mut e_yxxx = Matrix::zeros(p, n);
    let mut draws = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; batch];
    for code in 0..total {
        let mut r = code;
        for slot in idx.iter_mut() {
            *slot = (r % big_n as u64) as usize;
            r /= big_n as u64;
        }
        let mut aat = Matrix::zeros(big_n, big_n);
        for &i in &idx {
            aat[(i, i)] += 1.0;
        }
        let xt = Matrix::from_fn(n, batch, |i, j| c * x[(i, idx[j])]);
        let yt = Matrix::from_fn(p, batch, |i, j| c * y[(i, idx[j])]);
        let xx = xt.matmul_t(&xt)?;
        let yxt = yt.matmul_t(&xt)?;
        exx.axpy(prob, &xx);
        eyx.axpy(prob, &yxt);
        selector.axpy(prob, &(&(&aat * z_samples) * &aat));
        fourth.axpy(prob, &(&(&xx * z_features) * &xx));
        e_yxxy.axpy(prob, &yxt.matmul_t(&yxt)?);
        e_yxxx.axpy(prob, &(&yxt * &xx));
        draws.push((xx, yxt));
    }
    let eh = &(w * &exx) - &eyx;
    let (mut var_xx, mut var_yx, mut grad_var) = (0.0, 0.0, 0.0);
    for (xx, yxt) in &draws {
        var_xx += prob * (xx - &exx).frobenius_norm_sq();
        var_yx += prob * (yxt - &eyx).frobenius_norm_sq();
        grad_var += prob * (&(&(w * xx) - yxt) - &eh).frobenius_norm_sq();
    }
    Ok(EnumeratedMoments { exx, eyx, selector, fourth, e_yxxy, e_yxxx, var_xx, var_yx, grad_var })
}

/// Largest absolute difference between enumeration and the closed forms in
/// `sel`, per statistic.
pub fn enumeration_discrepancy(
    problem: &RegressionProblem,
    batch: usize,
    sel: &SelectorMoments,
    w: &Matrix,
) -> Result<Vec<(&'static str, f64)>> {
    let x = problem.data.x();
    let y = problem.data.y();
    let zs = x.t_matmul(x)?;
    let zf = Matrix::from_fn(problem.n(), problem.n(), |i, j| 1.0 / (1.0 + i as f64 + j as f64));
    let en = enumerate_minibatch(problem, batch, &zs, &zf, w)?;
    let yx = y.matmul_t(x)?;
    Ok(vec![
        ("exx", en.exx.max_abs_diff(&sel.exx(&problem.gram))),
        ("eyx", en.eyx.max_abs_diff(&sel.eyx(&yx))),
        ("selector", en.selector.max_abs_diff(&sel.selector_inner(&zs))),
        ("fourth", en.fourth.max_abs_diff(&sel.fourth_moment_map(x, &problem.gram, &zf))),
        ("eyxxy", en.e_yxxy.max_abs_diff(&sel.e_yxxy(x, y))),
        ("eyxxx", en.e_yxxx.max_abs_diff(&sel.e_yxxx(x, y))),
        ("var_xx", (en.var_xx - sel.var_xx(x, &problem.gram)).abs()),
        ("var_yx", (en.var_yx - sel.var_yx(x, y)).abs()),
        ("grad_var", (en.grad_var - sel.grad_var_trace(x, w, y)).abs()),
    ])
}

/// Whether `kind` has a closed-form enumeration check.
pub fn enumerable(kind: AugmentationKind) -> bool {
    kind == AugmentationKind::Minibatch
}
