//! Monro-Robbins type convergence conditions, rate forecasts and the
//! matrix-product concentration bound.

use std::fmt;

use crate::augmentation::{exact_moments, grad_variance_trace, xi_norm, AugmentationKind, AugmentationScheme};
use crate::dynamics::ExactRecursion;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::matrix::Matrix;
use crate::problem::RegressionProblem;
use crate::schedule::{growth_exponent, BatchRule, ScheduleSet};

/// Default `ε` in rate statements, used as fit slack.
pub const DEFAULT_EPSILON_SLACK: f64 = 0.05;

/// Power-law exponents `η_t = Θ(t^{−x})`, `σ_t² = Θ(t^{−y})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawPlan {
    pub x: f64,
    pub y: f64,
    pub kind: AugmentationKind,
    pub batch: BatchRule,
}

impl PowerLawPlan {
    pub fn new(x: f64, y: f64, kind: AugmentationKind, batch: BatchRule) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite() && y >= 0.0 && y.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponents must be finite and >= 0, got ({x}, {y})")));
        }
        Ok(Self { x, y, kind, batch })
    }

    /// Reads the exponents off a schedule (`y = 0` without noise).
    pub fn from_schedule(kind: AugmentationKind, s: &ScheduleSet) -> Result<Self> {
        let y = if kind.has_noise() { s.sigma2.map_or(0.0, |p| p.exponent) } else { 0.0 };
        Self::new(s.eta.exponent, y, kind, s.batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    GuaranteedConvergent,
    NotGuaranteed,
}

impl Verdict {
    pub fn is_convergent(self) -> bool {
        self == Self::GuaranteedConvergent
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GuaranteedConvergent => "guaranteed-convergent",
            Self::NotGuaranteed => "not-guaranteed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionStatus {
    /// Decided exactly from exponents.
    Symbolic(bool),
    /// Numeric evidence only; never upgrades a verdict.
    Heuristic { holds: bool, growth_exponent: f64 },
}

impl ConditionStatus {
    pub fn holds(&self) -> bool {
        match *self {
            Self::Symbolic(b) => b,
            Self::Heuristic { holds, .. } => holds,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self, Self::Symbolic(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: String,
    /// Whether the verdict depends on this condition.
    pub required: bool,
    pub status: ConditionStatus,
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    PowerLaw,
    /// `exp(−C t^{exponent})`.
    Exponential,
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PowerLaw => "power-law",
            Self::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateForecast {
    pub kind: RateKind,
    pub exponent: f64,
    pub epsilon_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub verdict: Verdict,
    pub conditions: Vec<ConditionCheck>,
    pub forecast: Option<RateForecast>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Verdict from the required conditions: convergent only if every one is
    /// symbolically true.
    fn assemble(conditions: Vec<ConditionCheck>, forecast: Option<RateForecast>, notes: Vec<String>) -> Self {
        let ok = conditions
            .iter()
            .filter(|c| c.required)
            .all(|c| c.status == ConditionStatus::Symbolic(true));
        let verdict = if ok { Verdict::GuaranteedConvergent } else { Verdict::NotGuaranteed };
        Self { verdict, conditions, forecast: if ok { forecast } else { None }, notes }
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Aligned human-readable rendering.
    pub fn render(&self) -> String {
        let mut out = format!("verdict: {}\n", self.verdict);
        if let Some(f) = &self.forecast {
            out.push_str(&format!(
                "forecast: {} rate exponent {:.6} (epsilon slack {})\n",
                f.kind, f.exponent, f.epsilon_slack
            ));
        }
        let width = self.conditions.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.conditions {
            let status = match c.status {
                ConditionStatus::Symbolic(b) => format!("{} (symbolic)", if b { "holds" } else { "fails" }),
                ConditionStatus::Heuristic { holds, growth_exponent } => format!(
                    "{} (heuristic, growth exponent {growth_exponent:.4})",
                    if holds { "holds" } else { "fails" }
                ),
            };
            let req = if c.required { "required" } else { "info" };
            out.push_str(&format!("  {:<width$}  {:<8}  {status}: {}\n", c.name, req, c.evidence));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn sym(name: &str, required: bool, holds: bool, evidence: String) -> ConditionCheck {
    ConditionCheck { name: name.into(), required, status: ConditionStatus::Symbolic(holds), evidence }
}

fn expect_kind(plan: &PowerLawPlan, kind: AugmentationKind) -> Result<()> {
    if plan.kind != kind {
        return Err(Error::InvalidParameter(format!("checker expects {kind}, plan has {}", plan.kind)));
    }
    Ok(())
}

fn power_forecast(plan: &PowerLawPlan) -> Option<RateForecast> {
    Some(RateForecast {
        kind: RateKind::PowerLaw,
        exponent: plan.y.min(plan.x / 2.0),
        epsilon_slack: DEFAULT_EPSILON_SLACK,
    })
}

/// Additive Gaussian noise: convergent iff `x, y > 0`, `x + y < 1 < 2x + y`.
pub fn classify_gauss(plan: &PowerLawPlan) -> Result<ConditionReport> {
    expect_kind(plan, AugmentationKind::AdditiveNoise)?;
    let (x, y) = (plan.x, plan.y);
    let conditions = vec![
        sym("eta_to_zero", true, x > 0.0, format!("x = {x}")),
        sym("sigma2_to_zero", true, y > 0.0, format!("y = {y}")),
        sym("sum_eta_sigma2_diverges", true, x + y < 1.0, format!("x + y = {} < 1", x + y)),
        sym("sum_eta2_sigma2_converges", true, 2.0 * x + y > 1.0, format!("2x + y = {} > 1", 2.0 * x + y)),
    ];
    Ok(ConditionReport::assemble(conditions, power_forecast(plan), Vec::new()))
}

/// Noiseless minibatch SGD: convergent iff `0 < x < 1`, exponential rate
/// in `t^{1−x}`.
pub fn classify_sgd(plan: &PowerLawPlan) -> Result<ConditionReport> {
    expect_kind(plan, AugmentationKind::Minibatch)?;
    let x = plan.x;
    let conditions = vec![
        sym("eta_to_zero", true, x > 0.0, format!("x = {x}")),
        sym("sum_eta_diverges", true, x < 1.0, format!("x = {x} < 1")),
    ];
    let forecast = Some(RateForecast { kind: RateKind::Exponential, exponent: 1.0 - x, epsilon_slack: DEFAULT_EPSILON_SLACK });
    Ok(ConditionReport::assemble(conditions, forecast, Vec::new()))
}

/// Minibatch SGD with additive noise: convergent iff `x, y > 0` and
/// `x + y < 1 < 2x + y`.
pub fn classify_sgd_noise(plan: &PowerLawPlan) -> Result<ConditionReport> {
    expect_kind(plan, AugmentationKind::MinibatchWithNoise)?;
    let (x, y) = (plan.x, plan.y);
    let conditions = vec![
        sym("eta_to_zero", true, x > 0.0, format!("x = {x}")),
        sym("sigma2_to_zero", true, y > 0.0, format!("y = {y}")),
        sym("sum_eta_sigma2_diverges", true, x + y < 1.0, format!("x + y = {} < 1", x + y)),
        sym("sum_eta2_sigma2_converges", true, 2.0 * x + y > 1.0, format!("2x + y = {} > 1", 2.0 * x + y)),
        sym(
            "eta_sigma2_dominates_eta2",
            false,
            y < x,
            format!("y = {y} < x = {x}: Σ(ησ² − Cη²) = ∞ for every C"),
        ),
    ];
    let mut notes = Vec::new();
    if y >= x {
        notes.push("Σ(η_tσ_t² − Cη_t²) diverges only when y < x; the power-law hypotheses x + y < 1 < 2x + y are used for the verdict".into());
    }
    if 2.0 * x <= 1.0 && 2.0 * x + y > 1.0 {
        notes.push(format!("large learning rate: Σ η_t² diverges (2x = {}) while Σ η_t²σ_t² converges", 2.0 * x));
    }
    Ok(ConditionReport::assemble(conditions, power_forecast(plan), notes))
}

/// Dispatches to the classifier for the plan's scheme kind.
pub fn classify(plan: &PowerLawPlan) -> Result<ConditionReport> {
    match plan.kind {
        AugmentationKind::AdditiveNoise => classify_gauss(plan),
        AugmentationKind::Minibatch => classify_sgd(plan),
        AugmentationKind::MinibatchWithNoise => classify_sgd_noise(plan),
        AugmentationKind::Identity => Err(Error::InvalidParameter("no closed-form classifier for identity".into())),
    }
}

/// The quantities entering the general conditions at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMoments {
    /// `λ_min,V∥(E[X_tX_tᵀ])`.
    pub lambda_min: f64,
    pub var_xx: f64,
    pub var_yx: f64,
    /// Gradient variance at `E[W_t]`, when the mean is tracked.
    pub grad_var_at_mean: Option<f64>,
}

/// Decay exponents of the series in the general theorem, `∞` for series
/// that vanish or decay faster than any power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesExponents {
    /// `η_t λ_min ~ t^{−α}`.
    pub alpha: f64,
    /// `‖Ξ_t‖ ~ t^{−β₁}`.
    pub beta1: f64,
    /// `η_t² var_xx ~ t^{−γ}`.
    pub gamma: f64,
    /// `η_t² var_yx ~ t^{−γ_yx}`.
    pub gamma_yx: f64,
    /// `η_t² · grad variance at E[W_t] ~ t^{−β₂}`.
    pub beta2: f64,
}

impl SeriesExponents {
    /// Leading exponents for a power-law plan.
    pub fn for_plan(plan: &PowerLawPlan) -> Self {
        let (x, y) = (plan.x, plan.y);
        let inf = f64::INFINITY;
        let noisy = plan.kind.has_noise();
        let alpha = if noisy { x + y } else { x };
        let beta1 = if noisy && y > 0.0 { y + 1.0 } else { inf };
        match plan.kind {
            AugmentationKind::Identity => Self { alpha, beta1, gamma: inf, gamma_yx: inf, beta2: inf },
            AugmentationKind::AdditiveNoise => {
                let g = 2.0 * x + y;
                Self { alpha, beta1, gamma: g, gamma_yx: g, beta2: g }
            }
            // The minibatch gradient variance vanishes at the interpolating
            // optimum and the mean converges exponentially.
            AugmentationKind::Minibatch => Self { alpha, beta1, gamma: 2.0 * x, gamma_yx: 2.0 * x, beta2: inf },
            AugmentationKind::MinibatchWithNoise => {
                Self { alpha, beta1, gamma: 2.0 * x, gamma_yx: 2.0 * x, beta2: 2.0 * x + y }
            }
        }
    }
}

fn fmt_exp(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// General Monro-Robbins check.
///
/// Partial sums and growth exponents of the four series are evaluated up to
/// `horizon` from the supplied oracles. When `plan` is given (power-law
/// schedule with constant batch) the conditions are decided symbolically
/// from exponents; otherwise they are heuristic and the verdict is
/// `NotGuaranteed`.
pub fn check_general(
    mut moments: impl FnMut(usize) -> StepMoments,
    xi: impl Fn(usize) -> f64,
    schedules: &ScheduleSet,
    plan: Option<&PowerLawPlan>,
    horizon: usize,
) -> ConditionReport {
    let mut s_lambda = Vec::with_capacity(horizon);
    let mut s_xi = Vec::with_capacity(horizon);
    let mut s_var = Vec::with_capacity(horizon);
    let mut s_enh = Vec::with_capacity(horizon);
    let mut has_enh = true;
    for t in 0..horizon {
        let p = schedules.eval(t);
        let m = moments(t);
        let e2 = p.eta * p.eta;
        s_lambda.push(p.eta * m.lambda_min);
        s_xi.push(xi(t));
        s_var.push(e2 * (m.var_xx + m.var_yx));
        match m.grad_var_at_mean {
            Some(g) => s_enh.push(e2 * (m.var_xx + g)),
            None => has_enh = false,
        }
    }
    let g_lambda = growth_exponent(|t| s_lambda[t], horizon);
    let g_xi = growth_exponent(|t| s_xi[t], horizon);
    let g_var = growth_exponent(|t| s_var[t], horizon);
    let g_enh = has_enh.then(|| growth_exponent(|t| s_enh[t], horizon));
    let heur = |g: &crate::schedule::GrowthEstimate, want_divergent: bool| ConditionStatus::Heuristic {
        holds: g.suggests_divergence() == want_divergent,
        growth_exponent: g.exponent,
    };
    let ev = |g: &crate::schedule::GrowthEstimate| {
        format!("partial sum {:.6e} to t = {horizon}, block growth exponent {}", g.partial_sum, fmt_exp(g.exponent))
    };

    let x = schedules.eta.exponent;
    let mut conditions = Vec::new();
    let mut notes = Vec::new();
    let Some(plan) = plan.filter(|_| schedules.is_power_law()) else {
        conditions.push(ConditionCheck {
            name: "eta_to_zero".into(),
            required: true,
            status: ConditionStatus::Heuristic { holds: x > 0.0, growth_exponent: -x },
            evidence: format!("eta exponent {x}"),
        });
        conditions.push(ConditionCheck { name: "mr1_sum_eta_lambda_diverges".into(), required: true, status: heur(&g_lambda, true), evidence: ev(&g_lambda) });
        conditions.push(ConditionCheck { name: "mr2_sum_xi_converges".into(), required: true, status: heur(&g_xi, false), evidence: ev(&g_xi) });
        let mut mr3 = heur(&g_var, false);
        let mut mr3_ev = ev(&g_var);
        if let Some(g) = &g_enh {
            if !mr3.holds() && !g.suggests_divergence() {
                mr3 = heur(g, false);
                mr3_ev = format!("enhanced form: {}", ev(g));
            }
        }
        conditions.push(ConditionCheck { name: "mr3_variance_summable".into(), required: true, status: mr3, evidence: mr3_ev });
        notes.push("schedule is not a pure power law: conditions are numeric heuristics and cannot certify convergence".into());
        return ConditionReport::assemble(conditions, None, notes);
    };

    let e = SeriesExponents::for_plan(plan);
    conditions.push(sym("eta_to_zero", true, plan.x > 0.0, format!("x = {}", plan.x)));
    conditions.push(ConditionCheck {
        name: "mr1_sum_eta_lambda_diverges".into(),
        required: true,
        status: ConditionStatus::Symbolic(e.alpha < 1.0),
        evidence: format!("alpha = {} < 1; {}", fmt_exp(e.alpha), ev(&g_lambda)),
    });
    conditions.push(ConditionCheck {
        name: "mr2_sum_xi_converges".into(),
        required: true,
        status: ConditionStatus::Symbolic(e.beta1 > 1.0),
        evidence: format!("beta1 = {} > 1; {}", fmt_exp(e.beta1), ev(&g_xi)),
    });
    let basic = e.gamma.min(e.gamma_yx) > 1.0;
    let enhanced = e.gamma.min(e.beta2) > 1.0;
    conditions.push(ConditionCheck {
        name: "mr3_variance_summable".into(),
        required: true,
        status: ConditionStatus::Symbolic(basic || enhanced),
        evidence: format!(
            "basic min(gamma, gamma_yx) = {} {}; enhanced min(gamma, beta2) = {} {}; {}",
            fmt_exp(e.gamma.min(e.gamma_yx)),
            if basic { "> 1" } else { "<= 1" },
            fmt_exp(e.gamma.min(e.beta2)),
            if enhanced { "> 1" } else { "<= 1" },
            g_enh.as_ref().map_or_else(|| ev(&g_var), ev)
        ),
    });
    let rate_ok = e.alpha > 0.0 && e.alpha < 1.0 && e.beta1 > 1.0 && e.beta2 > 1.0 && e.gamma > e.alpha;
    conditions.push(sym(
        "rate_hypotheses",
        false,
        rate_ok,
        format!(
            "0 < alpha < 1 < beta1, beta2 and gamma > alpha with alpha = {}, beta1 = {}, beta2 = {}, gamma = {}",
            fmt_exp(e.alpha),
            fmt_exp(e.beta1),
            fmt_exp(e.beta2),
            fmt_exp(e.gamma)
        ),
    ));
    if e.gamma <= e.alpha {
        notes.push("gamma > alpha fails: the rate statement does not apply".into());
    }
    let forecast = if rate_ok {
        let r = (e.beta1 - 1.0).min((e.beta2 - e.alpha) / 2.0);
        if r.is_finite() {
            Some(RateForecast { kind: RateKind::PowerLaw, exponent: r, epsilon_slack: DEFAULT_EPSILON_SLACK })
        } else {
            notes.push("rate exponent unbounded: decay faster than any power law".into());
            None
        }
    } else {
        None
    };
    ConditionReport::assemble(conditions, forecast, notes)
}

/// Runs [`check_general`] with moments, drift and mean taken from a scheme.
///
/// The gradient variance is evaluated at the exact mean `E[W_t]` started
/// from `w0`. Schemes without closed-form fourth moments are rejected.
pub fn check_scheme(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w0: &Matrix,
    horizon: usize,
) -> Result<ConditionReport> {
    if !scheme.has_closed_form() {
        return Err(Error::UnsupportedScheme(format!(
            "{} noise has no closed-form fourth moments",
            scheme.noise.name()
        )));
    }
    let plan = PowerLawPlan::from_schedule(scheme.kind, &scheme.schedule)?;
    let mut rec = ExactRecursion::new(problem, scheme, w0, false)?;
    let x = problem.data.x();
    let y = problem.data.y();
    let moments = |t: usize| {
        while rec.state().t < t {
            rec.advance();
        }
        let sel = scheme.selector(t);
        StepMoments {
            lambda_min: scheme.lambda_min(problem, t),
            var_xx: sel.var_xx(x, &problem.gram),
            var_yx: sel.var_yx(x, y),
            grad_var_at_mean: Some(sel.grad_var_trace(x, &rec.state().mean_w, y)),
        }
    };
    let report = check_general(moments, |t| xi_norm(scheme, problem, t), &scheme.schedule, Some(&plan), horizon);
    Ok(report)
}

/// `(e^{Σb²}∏a²·z0², (e^{Σb²} − 1)∏a²·z0²)`: bounds on `E‖Z_n‖₂²` and on
/// `E‖Z_n − E Z_n‖₂²` for `Z_n = Y_n⋯Y_1 Z_0`.
pub fn matrix_product_bound(a_seq: &[f64], b2_seq: &[f64], z0_norm: f64) -> Result<(f64, f64)> {
    if a_seq.len() != b2_seq.len() {
        return Err(Error::InvalidParameter("a and b² sequences differ in length".into()));
    }
    if a_seq.iter().any(|&a| !(a > 0.0)) || b2_seq.iter().any(|&b| !(b >= 0.0)) {
        return Err(Error::InvalidParameter("need a_i > 0 and b_i² >= 0".into()));
    }
    let log_a2: f64 = a_seq.iter().map(|a| 2.0 * a.ln()).sum();
    let sum_b2: f64 = b2_seq.iter().sum();
    let base = (log_a2).exp() * z0_norm * z0_norm;
    Ok((sum_b2.exp() * base, sum_b2.exp_m1() * base))
}

/// Per-step inputs of [`matrix_product_bound`] for the factors
/// `Id − (2η_t/N)X_tX_tᵀ`: `a_t = ‖E[·]‖₂` and
/// `b_t² = (4η_t²/N²)·var_xx / a_t²` (Frobenius bound on the spectral
/// variance).
pub fn product_factor_bounds(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = problem.n();
    let big_n = problem.samples() as f64;
    let mut a_seq = Vec::with_capacity(steps);
    let mut b2_seq = Vec::with_capacity(steps);
    for t in 0..steps {
        let p = scheme.params(t);
        let m = exact_moments(scheme, problem, t);
        let c = 2.0 * p.eta / big_n;
        let mut ey = Matrix::identity(n);
        ey.axpy(-c, &m.exx);
        let a = spectral_norm(&ey)?;
        a_seq.push(a);
        b2_seq.push(c * c * m.var_xx / (a * a));
    }
    Ok((a_seq, b2_seq))
}

/// Noise-to-contraction ratio `b(t)/a(t)` for minibatch SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScaling {
    /// `b(t)/a(t)`.
    pub ratio: f64,
    /// `a(t) = (2η_t/N)λ_min,V∥`.
    pub a: f64,
    /// `b(t) = (4η_t²/N²)·grad variance at w_mean`.
    pub b: f64,
    /// `C` with `ratio ≤ C η_t / B_t`.
    pub constant: f64,
    /// `C η_t / B_t`.
    pub bound: f64,
}

impl LinearScaling {
    pub fn within_bound(&self) -> bool {
        self.ratio <= self.bound * (1.0 + 1e-12)
    }
}

/// Linear-scaling diagnostic; `C = 4N‖ΔQ∥‖₂²‖XXᵀ‖₂²/λ_min` with
/// `Δ = w_mean − W_∞*`. The bound assumes consistent data (`Y = W_min X`).
pub fn linear_scaling_ratio(
    problem: &RegressionProblem,
    scheme: &AugmentationScheme,
    w_mean: &Matrix,
    t: usize,
) -> Result<LinearScaling> {
    if scheme.kind != AugmentationKind::Minibatch {
        return Err(Error::InvalidParameter(format!("linear scaling needs a minibatch scheme, got {}", scheme.kind)));
    }
    let p = scheme.params(t);
    let big_n = problem.samples() as f64;
    let lambda = scheme.lambda_min(problem, t);
    let a = 2.0 * p.eta / big_n * lambda;
    let b = 4.0 * p.eta * p.eta / (big_n * big_n) * grad_variance_trace(scheme, problem, t, w_mean)?;
    let delta_q = &(w_mean - &problem.w_min) * &problem.q_parallel;
    let constant = 4.0 * big_n * spectral_norm(&delta_q)?.powi(2) * spectral_norm(&problem.gram)?.powi(2) / lambda;
    let ratio = if a > 0.0 { b / a } else { f64::INFINITY };
    Ok(LinearScaling { ratio, a, b, constant, bound: constant * p.eta / p.batch as f64 })
}
