//! Augmented gradient descent: trajectories, ensembles and exact moment
//! recursions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::augmentation::{proxy_optimum_fast, AugmentationKind, AugmentationScheme, AugmentedBatch};
use crate::error::{shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::problem::{loss, RegressionProblem};
use crate::schedule::StepParams;
use crate::stats::{bootstrap_median_se, median, NeumaierSum};

/// `‖W‖_F` beyond which a trajectory counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Bootstrap resamples for median standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// `W + (2η/N)(Y_t − W X_t)X_tᵀ`.
pub fn step(w: &Matrix, batch: &AugmentedBatch, eta: f64, samples: usize) -> Result<Matrix> {
    let (p, n) = w.shape();
    if batch.x_t.rows() != n || batch.y_t.rows() != p || batch.x_t.cols() != batch.y_t.cols() {
        return Err(shape_err("step", w.shape(), batch.x_t.shape()));
    }
    let mut out = w.clone();
    step_in_place(
        out.as_mut_slice(),
        batch.x_t.as_slice(),
        batch.y_t.as_slice(),
        (p, n, batch.x_t.cols()),
        2.0 * eta / samples as f64,
        &mut Vec::new(),
    );
    Ok(out)
}

/// Row-major kernel of [`step`]; `scale = 2η/N`.
#[inline]
fn step_in_place(w: &mut [f64], xt: &[f64], yt: &[f64], (p, n, b): (usize, usize, usize), scale: f64, r: &mut Vec<f64>) {
    r.clear();
    r.extend_from_slice(yt);
    for i in 0..p {
        let ri = &mut r[i * b..(i + 1) * b];
        let wi = &w[i * n..(i + 1) * n];
        for (k, &wik) in wi.iter().enumerate() {
            let xk = &xt[k * b..(k + 1) * b];
            for (rv, &xv) in ri.iter_mut().zip(xk) {
                *rv -= wik * xv;
            }
        }
    }
    for i in 0..p {
        let ri = &r[i * b..(i + 1) * b];
        let wi = &mut w[i * n..(i + 1) * n];
        for (k, wik) in wi.iter_mut().enumerate() {
            let xk = &xt[k * b..(k + 1) * b];
            let mut acc = 0.0;
            for (&rv, &xv) in ri.iter().zip(xk) {
                acc += rv * xv;
            }
            *wik += scale * acc;
        }
    }
}

/// Which step counts to record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum RecordCadence {
    /// `{1, 2, 4, 8, …} ∪ {t_max}`.
    #[default]
    Log2,
    /// `{k, 2k, 3k, …} ∪ {t_max}`.
    Every(usize),
    /// Roughly `per_decade` log-spaced points per decade, `∪ {t_max}`.
    LogSpaced { per_decade: usize },
    /// Explicit step counts (values above `t_max` are dropped).
    Steps(Vec<usize>),
}

impl RecordCadence {
    /// Sorted, deduplicated checkpoints in `[1, t_max]`, always ending at
    /// `t_max`.
    pub fn checkpoints(&self, t_max: usize) -> Vec<usize> {
        let mut out: Vec<usize> = match self {
            Self::Log2 => std::iter::successors(Some(1usize), |&t| t.checked_mul(2))
                .take_while(|&t| t <= t_max)
                .collect(),
            Self::Every(k) => {
                let k = (*k).max(1);
                (1..=t_max / k).map(|i| i * k).collect()
            }
            Self::LogSpaced { per_decade } => {
                let per = (*per_decade).max(1) as f64;
                let top = (t_max as f64).log10();
                let count = (top * per).ceil() as usize;
                (0..=count)
                    .map(|i| 10f64.powf(i as f64 / per).round() as usize)
                    .filter(|&t| t >= 1 && t <= t_max)
                    .collect()
            }
            Self::Steps(v) => v.iter().copied().filter(|&t| t >= 1 && t <= t_max).collect(),
        };
        if t_max >= 1 {
            out.push(t_max);
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// State after `t` steps of one trajectory.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub t: usize,
    pub w: Matrix,
    /// `‖W_tQ∥ − W_∞*‖_F`.
    pub err_par: f64,
    /// `‖W_t − W_∞*‖_F`.
    pub err_total: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub steps: Vec<Checkpoint>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.steps.last()
    }
}

/// Per-trajectory random stream: `master_seed ⊕ index`.
pub fn trajectory_seed(master_seed: u64, index: usize) -> u64 {
    master_seed ^ index as u64
}

struct Errors {
    q: Matrix,
    w_inf: Matrix,
}

impl Errors {
    fn new(problem: &RegressionProblem, scheme: &AugmentationScheme) -> Self {
        Self { q: scheme.q_parallel(problem), w_inf: problem.w_min.clone() }
    }

    fn checkpoint(&self, problem: &RegressionProblem, t: usize, w: &Matrix) -> Checkpoint {
        let wq = w * &self.q;
        Checkpoint {
            t,
            w: w.clone(),
            err_par: (&wq - &self.w_inf).frobenius_norm(),
            err_total: (w - &self.w_inf).frobenius_norm(),
            loss: loss(w, &problem.data).expect("conforming"),
        }
    }
}

/// Runs one trajectory and returns whatever was recorded, plus the
/// divergence error if the run blew up.
pub fn run_trajectory_partial(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    t_max: usize,
    seed: u64,
    cadence: &RecordCadence,
) -> Result<(TrajectoryRecord, Option<Error>)> {
    if w0.shape() != (problem.p(), problem.n()) {
        return Err(shape_err("initial weights", w0.shape(), (problem.p(), problem.n())));
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be >= 1".into()));
    }
    let checkpoints = cadence.checkpoints(t_max);
    let errors = Errors::new(problem, scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, n, big_n) = (problem.p(), problem.n(), problem.samples());
    let mut w = w0.clone();
    let (mut idx, mut xt, mut yt, mut r) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut record = TrajectoryRecord { seed, steps: Vec::with_capacity(checkpoints.len()) };
    let mut next = 0;
    let mut warned = false;
    let limit = DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD;
    for t in 0..t_max {
        let params: StepParams = scheme.params(t);
        let b = scheme.fill_batch(problem, &params, &mut rng, &mut idx, &mut xt, &mut yt);
        if !warned && (t < 64 || t.is_power_of_two()) {
            warned = stability_warning(&xt, n, b, params.eta, big_n, t);
        }
        step_in_place(w.as_mut_slice(), &xt, &yt, (p, n, b), 2.0 * params.eta / big_n as f64, &mut r);
        let norm2 = w.frobenius_norm_sq();
        if !(norm2 <= limit) {
            let err = Error::Divergence { trajectory: 0, step: t + 1, last_finite_step: t };
            return Ok((record, Some(err)));
        }
        if next < checkpoints.len() && checkpoints[next] == t + 1 {
            record.steps.push(errors.checkpoint(problem, t + 1, &w));
            next += 1;
        }
    }
    Ok((record, None))
}

/// Checks `η‖X_tX_tᵀ‖₂·2/N > 2` and logs a warning when it holds.
fn stability_warning(xt: &[f64], n: usize, b: usize, eta: f64, big_n: usize, t: usize) -> bool {
    let frob: f64 = xt.iter().map(|v| v * v).sum();
    let scale = 2.0 * eta / big_n as f64;
    if scale * frob <= 2.0 {
        return false;
    }
    let x = Matrix::from_vec_unchecked(n, b, xt.to_vec());
    let xx = x.matmul_t(&x).expect("conforming");
    let top = crate::linalg::symmetric_eigen(&xx).map(|(v, _)| *v.last().unwrap_or(&0.0)).unwrap_or(frob);
    if scale * top > 2.0 {
        log::warn!("step {t}: 2η‖X_tX_tᵀ‖₂/N = {:.3} exceeds 2; the iteration may be unstable", scale * top);
        return true;
    }
    false
}

/// Runs one trajectory; divergence is an error.
pub fn run_trajectory(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    t_max: usize,
    seed: u64,
    cadence: &RecordCadence,
) -> Result<TrajectoryRecord> {
    match run_trajectory_partial(problem, scheme, w0, t_max, seed, cadence)? {
        (rec, None) => Ok(rec),
        (_, Some(e)) => Err(e),
    }
}

/// Ensemble run parameters.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub t_max: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    pub cadence: RecordCadence,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

/// Runs `n_traj` independent trajectories. Output order (and hence every
/// statistic) does not depend on the worker count.
pub fn run_ensemble_records(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    cfg: &EnsembleConfig,
) -> Result<Vec<(TrajectoryRecord, Option<Error>)>> {
    if cfg.n_traj < 2 {
        return Err(Error::InvalidParameter("n_traj must be >= 2".into()));
    }
    let job = || {
        (0..cfg.n_traj)
            .into_par_iter()
            .map(|i| {
                run_trajectory_partial(problem, scheme, w0, cfg.t_max, trajectory_seed(cfg.master_seed, i), &cfg.cadence)
                    .map(|(rec, err)| {
                        let err = err.map(|e| match e {
                            Error::Divergence { step, last_finite_step, .. } => {
                                Error::Divergence { trajectory: i, step, last_finite_step }
                            }
                            other => other,
                        });
                        (rec, err)
                    })
            })
            .collect::<Result<Vec<_>>>()
    };
    match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Cross-trajectory statistics at one checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointStats {
    pub t: usize,
    pub mean_w: Matrix,
    pub err_par_median: f64,
    pub err_par_se: f64,
    pub err_total_median: f64,
    pub err_total_se: f64,
    /// `E‖(W_t − E[W_t])Q∥‖_F²` (unbiased estimate).
    pub var_trace: f64,
    pub var_trace_se: f64,
    pub loss_median: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub count: usize,
    pub initial_err_par: f64,
    pub initial_err_total: f64,
    pub checkpoints: Vec<CheckpointStats>,
}

impl EnsembleStats {
    /// Aggregates records in index order. Checkpoints missing from any
    /// record (after divergence) are dropped.
    pub fn from_records(
        problem: &RegressionProblem,
        scheme: &AugmentationScheme,
        w0: &Matrix,
        records: &[TrajectoryRecord],
        bootstrap_seed: u64,
    ) -> Self {
        let q = scheme.q_parallel(problem);
        let errors = Errors::new(problem, scheme);
        let init = errors.checkpoint(problem, 0, w0);
        let depth = records.iter().map(|r| r.steps.len()).min().unwrap_or(0);
        let count = records.len();
        let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
        let mut checkpoints = Vec::with_capacity(depth);
        for c in 0..depth {
            let snaps: Vec<&Checkpoint> = records.iter().map(|r| &r.steps[c]).collect();
            let mean_w = compensated_mean(snaps.iter().map(|s| &s.w), count);
            let mean_q = &mean_w * &q;
            let dev: Vec<f64> = snaps
                .iter()
                .map(|s| (&(&s.w * &q) - &mean_q).frobenius_norm_sq() * count as f64 / (count - 1).max(1) as f64)
                .collect();
            let err_par: Vec<f64> = snaps.iter().map(|s| s.err_par).collect();
            let err_total: Vec<f64> = snaps.iter().map(|s| s.err_total).collect();
            let losses: Vec<f64> = snaps.iter().map(|s| s.loss).collect();
            checkpoints.push(CheckpointStats {
                t: snaps[0].t,
                mean_w,
                err_par_median: median(&err_par),
                err_par_se: bootstrap_median_se(&err_par, BOOTSTRAP_RESAMPLES, &mut rng),
                err_total_median: median(&err_total),
                err_total_se: bootstrap_median_se(&err_total, BOOTSTRAP_RESAMPLES, &mut rng),
                var_trace: crate::stats::mean(&dev),
                var_trace_se: crate::stats::standard_error(&dev),
                loss_median: median(&losses),
            });
        }
        Self { count, initial_err_par: init.err_par, initial_err_total: init.err_total, checkpoints }
    }

    /// `(t, median err_total)` series.
    pub fn err_total_series(&self) -> Vec<(f64, f64)> {
        self.checkpoints.iter().map(|c| (c.t as f64, c.err_total_median)).collect()
    }

    /// `(t, median err_par)` series.
    pub fn err_par_series(&self) -> Vec<(f64, f64)> {
        self.checkpoints.iter().map(|c| (c.t as f64, c.err_par_median)).collect()
    }
}

/// Bootstrap stream derived from the master seed.
pub fn bootstrap_seed(master_seed: u64) -> u64 {
    master_seed.rotate_left(17) ^ 0xb007_5eed_0000_0001
}

fn compensated_mean<'a>(ws: impl Iterator<Item = &'a Matrix>, count: usize) -> Matrix {
    let mut acc: Option<Vec<NeumaierSum>> = None;
    let mut shape = (0, 0);
    for w in ws {
        shape = w.shape();
        let a = acc.get_or_insert_with(|| vec![NeumaierSum::default(); w.as_slice().len()]);
        for (s, &v) in a.iter_mut().zip(w.as_slice()) {
            s.add(v);
        }
    }
    let data = acc
        .unwrap_or_default()
        .iter()
        .map(|s| s.value() / count as f64)
        .collect();
    Matrix::from_vec_unchecked(shape.0, shape.1, data)
}

/// Runs an ensemble and aggregates it. Divergence of any trajectory is an
/// error; see [`run_ensemble_partial`] to keep the partial statistics.
pub fn run_ensemble(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats> {
    match run_ensemble_partial(problem, scheme, w0, cfg)? {
        (stats, None) => Ok(stats),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run_ensemble`] but returns statistics over the checkpoints every
/// trajectory reached, along with the first divergence (by index).
pub fn run_ensemble_partial(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    cfg: &EnsembleConfig,
) -> Result<(EnsembleStats, Option<Error>)> {
    let outcomes = run_ensemble_records(problem, scheme, w0, cfg)?;
    let first_err = outcomes.iter().find_map(|(_, e)| e.clone());
    let records: Vec<TrajectoryRecord> = outcomes.into_iter().map(|(r, _)| r).collect();
    let stats = EnsembleStats::from_records(problem, scheme, w0, &records, bootstrap_seed(cfg.master_seed));
    Ok((stats, first_err))
}

/// Exact first and second moments of `W_t`.
#[derive(Debug, Clone)]
pub struct RecursionState {
    pub t: usize,
    /// `E[W_t] − W_t*`.
    pub delta: Matrix,
    /// `E[(W_t − E[W_t])ᵀ(W_t − E[W_t])]`.
    pub z: Matrix,
    /// `E[W_t]`.
    pub mean_w: Matrix,
    /// `W_t*`.
    pub optimum: Matrix,
}

impl RecursionState {
    /// `E‖(W_t − W_t*)Q‖_F² = ‖Δ'Q‖² + Tr(QZQ)`.
    pub fn mean_square_error(&self, q: &Matrix) -> f64 {
        (&self.delta * q).frobenius_norm_sq() + self.var_trace(q)
    }

    /// `Tr(Q Z Q)`.
    pub fn var_trace(&self, q: &Matrix) -> f64 {
        q.inner(&(&self.z * q))
    }
}

/// Step-by-step propagation of the exact mean and covariance recursions.
#[derive(Debug, Clone)]
pub struct ExactRecursion<'a> {
    problem: &'a RegressionProblem,
    scheme: &'a AugmentationScheme,
    with_variance: bool,
    state: RecursionState,
}

impl<'a> ExactRecursion<'a> {
    /// Starts from a deterministic `w0` (so `Z_0 = 0`). With
    /// `with_variance` the scheme must have closed-form fourth moments.
    pub fn new(
        problem: &'a RegressionProblem,
        scheme: &'a AugmentationScheme,
        w0: &Matrix,
        with_variance: bool,
    ) -> Result<Self> {
        if w0.shape() != (problem.p(), problem.n()) {
            return Err(shape_err("initial weights", w0.shape(), (problem.p(), problem.n())));
        }
        if with_variance && !scheme.has_closed_form() {
            return Err(Error::UnsupportedScheme(format!(
                "{} noise has no closed-form fourth moments",
                scheme.noise.name()
            )));
        }
        let optimum = proxy_optimum_fast(scheme, problem, 0);
        Ok(Self {
            problem,
            scheme,
            with_variance,
            state: RecursionState {
                t: 0,
                delta: w0 - &optimum,
                z: Matrix::zeros(problem.n(), problem.n()),
                mean_w: w0.clone(),
                optimum,
            },
        })
    }

    pub fn state(&self) -> &RecursionState {
        &self.state
    }

    /// Advances one step.
    pub fn advance(&mut self) {
        let t = self.state.t;
        let prob = self.problem;
        let x = prob.data.x();
        let y = prob.data.y();
        let params = self.scheme.params(t);
        let big_n = prob.samples() as f64;
        let a = 2.0 * params.eta / big_n;
        let sel = self.scheme.selector(t);
        let exx = sel.exx(&prob.gram);

        // Δ'_{t+1} = Δ'_t (Id − a E[X_tX_tᵀ]) − Ξ_t.
        let next_opt = proxy_optimum_fast(self.scheme, prob, t + 1);
        let xi = &next_opt - &self.state.optimum;
        let mut delta = self.state.delta.clone();
        delta.axpy(-a, &(&self.state.delta * &exx));
        delta -= &xi;

        // Identity dynamics are deterministic: Z stays exactly zero.
        if self.with_variance && self.scheme.kind != AugmentationKind::Identity {
            let z = &self.state.z;
            let m = &self.state.mean_w;
            let resid = &m.matmul(x).expect("conforming") - y;
            let ez = &exx * z;
            let mut next_z = z.clone();
            next_z.axpy(-a, &ez);
            next_z.axpy(-a, &ez.transpose());
            next_z.axpy(a * a, &sel.fourth_moment_map(x, &prob.gram, z));
            let eh = sel.grad_mean(x, m, &resid);
            let mut var_h = sel.grad_second_moment(x, &prob.gram, m, &resid);
            var_h.axpy(-1.0, &eh.t_matmul(&eh).expect("conforming"));
            next_z.axpy(a * a, &var_h);
            self.state.z = next_z.symmetrized();
        }
        self.state.mean_w = &delta + &next_opt;
        self.state.delta = delta;
        self.state.optimum = next_opt;
        self.state.t = t + 1;
    }

    /// States at the requested (sorted) step counts.
    pub fn run_to(&mut self, checkpoints: &[usize]) -> Vec<RecursionState> {
        let mut out = Vec::with_capacity(checkpoints.len());
        for &c in checkpoints {
            while self.state.t < c {
                self.advance();
            }
            if self.state.t == c {
                out.push(self.state.clone());
            }
        }
        out
    }
}

/// `Δ'_t = E[W_t] − W_t*` for `t = 0..=t_max`.
pub fn exact_mean_recursion(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    t_max: usize,
    w0: &Matrix,
) -> Result<Vec<RecursionState>> {
    let mut rec = ExactRecursion::new(problem, scheme, w0, false)?;
    let steps: Vec<usize> = (0..=t_max).collect();
    Ok(rec.run_to(&steps))
}

/// `Z_t` (and `Δ'_t`) for `t = 0..=t_max`.
pub fn exact_variance_recursion(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    t_max: usize,
    w0: &Matrix,
) -> Result<Vec<RecursionState>> {
    let mut rec = ExactRecursion::new(problem, scheme, w0, true)?;
    let steps: Vec<usize> = (0..=t_max).collect();
    Ok(rec.run_to(&steps))
}
