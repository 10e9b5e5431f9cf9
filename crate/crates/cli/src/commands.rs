//! The `run`, `check` and `sweep` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use augopt_core::conditions::{check_scheme, classify, ConditionReport, PowerLawPlan, RateKind};
use augopt_core::dynamics::{run_ensemble_partial, EnsembleConfig, EnsembleStats, ExactRecursion};
use augopt_core::problem::gaussian_init;
use augopt_core::stats::NeumaierSum;
use augopt_core::{AugmentationKind, Error as CoreError};

use crate::config::ExperimentConfig;
use crate::output::{num, rate_fits, render_rows_table, write_trajectory_csv, TrajectoryRow};
use crate::plot::{line_chart, Axes, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Ensemble statistics joined with schedule values and exact recursions.
pub struct Simulation {
    pub rows: Vec<TrajectoryRow>,
    pub stats: EnsembleStats,
    pub divergence: Option<CoreError>,
}

pub fn simulate(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Simulation> {
    let problem = cfg.build_problem()?;
    let scheme = cfg.scheme()?;
    let w0 = gaussian_init(problem.p(), problem.n(), cfg.run.init_seed);
    let ens = EnsembleConfig {
        t_max: cfg.run.t_max,
        n_traj: cfg.run.n_traj,
        master_seed: cfg.run.master_seed,
        cadence: cfg.run.cadence.clone(),
        workers,
    };
    let (stats, divergence) = run_ensemble_partial(&problem, &scheme, &w0, &ens)?;

    let q = scheme.q_parallel(&problem);
    let mut exact = if cfg.run.exact && scheme.has_closed_form() {
        Some(ExactRecursion::new(&problem, &scheme, &w0, true)?)
    } else {
        None
    };
    let big_n = problem.samples() as f64;
    let mut clock = NeumaierSum::default();
    let mut clock_t = 0usize;
    let mut rows = Vec::with_capacity(stats.checkpoints.len());
    for c in &stats.checkpoints {
        while clock_t < c.t {
            clock.add(2.0 * scheme.params(clock_t).eta / big_n * scheme.lambda_min(&problem, clock_t));
            clock_t += 1;
        }
        let (exact_mean_err, exact_var_trace) = match exact.as_mut() {
            Some(rec) => {
                while rec.state().t < c.t {
                    rec.advance();
                }
                let s = rec.state();
                (Some((&s.delta * &q).frobenius_norm()), Some(s.var_trace(&q)))
            }
            None => (None, None),
        };
        let p = scheme.params(c.t);
        rows.push(TrajectoryRow {
            t: c.t,
            eta: p.eta,
            sigma2: scheme.kind.has_noise().then_some(p.sigma2),
            batch: scheme.kind.has_batches().then_some(p.batch),
            intrinsic_time: clock.value(),
            err_par_median: c.err_par_median,
            err_par_se: c.err_par_se,
            err_total_median: c.err_total_median,
            var_trace: c.var_trace,
            var_trace_se: c.var_trace_se,
            exact_mean_err,
            exact_var_trace,
            loss_median: c.loss_median,
        });
    }
    Ok(Simulation { rows, stats, divergence })
}

fn describe(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scheme: {} ({} noise)", cfg.kind, cfg.noise.name());
    match &cfg.problem {
        crate::config::ProblemSource::Synthetic(p) => {
            let _ = writeln!(s, "problem: synthetic n={} N={} p={} seed={} label_noise={}", p.n, p.samples, p.outputs, p.seed, num(p.label_noise));
        }
        crate::config::ProblemSource::Files { inputs, labels } => {
            let _ = writeln!(s, "problem: inputs={} labels={}", inputs.display(), labels.display());
        }
    }
    let e = cfg.eta;
    let _ = write!(s, "schedule: eta = {} (t + {})^-{}", num(e.coefficient), e.offset, num(e.exponent));
    if let (true, Some(s2)) = (cfg.kind.has_noise(), cfg.sigma2) {
        let _ = write!(s, "; sigma2 = {} (t + {})^-{}", num(s2.coefficient), s2.offset, num(s2.exponent));
    }
    if cfg.kind.has_batches() {
        let _ = write!(s, "; batch = {:?}", cfg.batch);
    }
    s.push('\n');
    let _ = writeln!(
        s,
        "run: t_max={} n_traj={} master_seed={} init_seed={} record={:?}",
        cfg.run.t_max, cfg.run.n_traj, cfg.run.master_seed, cfg.run.init_seed, cfg.run.cadence
    );
    s
}

/// Exponent for the exponential fit, when the scheme has one.
fn exponential_scale(cfg: &ExperimentConfig) -> Option<f64> {
    (cfg.kind == AugmentationKind::Minibatch && cfg.eta.exponent < 1.0).then_some(cfg.eta.exponent)
}

/// Condition report for the configured schedule: the closed-form
/// classifier when one applies, otherwise the general check.
pub fn condition_report(cfg: &ExperimentConfig) -> Result<(ConditionReport, &'static str)> {
    let schedules = cfg.schedules()?;
    let plan = PowerLawPlan::from_schedule(cfg.kind, &schedules)?;
    if schedules.is_power_law() && cfg.kind != AugmentationKind::Identity {
        return Ok((classify(&plan)?, "classifier"));
    }
    let problem = cfg.build_problem()?;
    let scheme = cfg.scheme()?;
    let w0 = gaussian_init(problem.p(), problem.n(), cfg.run.init_seed);
    Ok((check_scheme(&problem, &scheme, &w0, cfg.check_horizon)?, "general"))
}

pub fn render_report(cfg: &ExperimentConfig, sim: &Simulation) -> String {
    let mut s = String::from("augopt run report\n");
    s.push_str(&describe(cfg));
    match &sim.divergence {
        Some(e) => {
            let _ = writeln!(s, "status: diverged ({e}); statistics cover checkpoints reached by every trajectory");
        }
        None => s.push_str("status: completed\n"),
    }
    let _ = writeln!(
        s,
        "initial err_par={} err_total={}",
        num(sim.stats.initial_err_par),
        num(sim.stats.initial_err_total)
    );
    if let Some(last) = sim.rows.last() {
        let _ = writeln!(
            s,
            "final t={} err_par_median={} err_total_median={} var_trace={} intrinsic_time={}",
            last.t,
            num(last.err_par_median),
            num(last.err_total_median),
            num(last.var_trace),
            num(last.intrinsic_time)
        );
    }
    match condition_report(cfg) {
        Ok((r, source)) => {
            let _ = writeln!(s, "verdict: {} ({source})", r.verdict);
            if let Some(f) = r.forecast {
                let _ = writeln!(s, "forecast: {} exponent={} epsilon_slack={}", f.kind, num(f.exponent), num(f.epsilon_slack));
            }
        }
        Err(e) => {
            let _ = writeln!(s, "verdict: unavailable ({e})");
        }
    }
    for (kind, f) in rate_fits(&sim.rows, cfg.fit_window, exponential_scale(cfg)) {
        s.push_str(&f.line(&kind));
        s.push('\n');
    }
    s
}

fn write_plots(dir: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let t = |f: fn(&TrajectoryRow) -> f64| rows.iter().map(|r| (r.t as f64, f(r))).collect::<Vec<_>>();
    let mut series = vec![
        Series { name: "err_par median", points: t(|r| r.err_par_median) },
        Series { name: "err_total median", points: t(|r| r.err_total_median) },
    ];
    if rows.iter().all(|r| r.exact_mean_err.is_some()) {
        series.push(Series { name: "exact mean err", points: t(|r| r.exact_mean_err.unwrap_or(f64::NAN)) });
    }
    let svg = line_chart("Error against steps", "t", "error", Axes { log_x: true, log_y: true }, &series);
    fs::write(dir.join("errors.svg"), svg)?;
    let tau: Vec<Series> = vec![
        Series { name: "err_par median", points: rows.iter().map(|r| (r.intrinsic_time, r.err_par_median)).collect() },
        Series { name: "var_trace", points: rows.iter().map(|r| (r.intrinsic_time, r.var_trace)).collect() },
    ];
    let svg = line_chart("Error against intrinsic time", "intrinsic time", "value", Axes { log_x: false, log_y: true }, &tau);
    fs::write(dir.join("intrinsic.svg"), svg)?;
    Ok(())
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, plots: bool, workers: Option<usize>) -> Result<i32> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let sim = simulate(cfg, workers)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &sim.rows)?;
    let report = render_report(cfg, &sim);
    fs::write(out.join("report.txt"), &report)?;
    if plots {
        write_plots(out, &sim.rows)?;
    }
    print!("{report}");
    print!("{}", render_rows_table(&sim.rows, (sim.rows.len() / 12).max(1)));
    Ok(if sim.divergence.is_some() { EXIT_DIVERGED } else { EXIT_OK })
}

pub const CHECK_CSV_HEADER: &str = "kind,x,y,verdict,forecast_kind,forecast_exponent,epsilon_slack,source";

pub fn check_csv_row(cfg: &ExperimentConfig, r: &ConditionReport, source: &str) -> String {
    let y = if cfg.kind.has_noise() { cfg.sigma2.map_or(String::new(), |s| num(s.exponent)) } else { String::new() };
    let (fk, fe, fs) = match r.forecast {
        Some(f) => (f.kind.to_string(), num(f.exponent), num(f.epsilon_slack)),
        None => (String::new(), String::new(), String::new()),
    };
    format!("{},{},{y},{},{fk},{fe},{fs},{source}", cfg.kind, num(cfg.eta.exponent), r.verdict)
}

pub fn cmd_check(cfg: &ExperimentConfig) -> Result<i32> {
    let (r, source) = condition_report(cfg)?;
    print!("{}", r.render());
    println!("{CHECK_CSV_HEADER}");
    println!("{}", check_csv_row(cfg, &r, source));
    Ok(if r.verdict.is_convergent() { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub y: Option<f64>,
    pub verdict: String,
    pub forecast_kind: Option<RateKind>,
    pub forecast_rate: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub fit_r2: Option<f64>,
    pub agreement: Option<bool>,
    pub note: String,
}

pub const SWEEP_HEADER: &str = "x,y,kind,verdict,forecast_kind,forecast_rate,fitted_rate,fit_r2,agreement,note";

impl SweepRow {
    fn csv(&self, kind: AugmentationKind) -> String {
        let o = |v: Option<f64>| v.map_or(String::new(), num);
        format!(
            "{},{},{kind},{},{},{},{},{},{},{}",
            num(self.x),
            o(self.y),
            self.verdict,
            self.forecast_kind.map_or(String::new(), |k| k.to_string()),
            o(self.forecast_rate),
            o(self.fitted_rate),
            o(self.fit_r2),
            self.agreement.map_or(String::new(), |a| a.to_string()),
            self.note
        )
    }
}

/// One sweep row: verdict, and a simulation when the plan is convergent
/// or `force` is set.
pub fn sweep_point(cfg: &ExperimentConfig, x: f64, y: f64, force: bool, workers: Option<usize>) -> Result<SweepRow> {
    let c = cfg.with_exponents(x, y);
    let (report, _) = condition_report(&c)?;
    let mut row = SweepRow {
        x,
        y: cfg.kind.has_noise().then_some(y),
        verdict: report.verdict.to_string(),
        forecast_kind: report.forecast.map(|f| f.kind),
        forecast_rate: report.forecast.map(|f| f.exponent),
        fitted_rate: None,
        fit_r2: None,
        agreement: None,
        note: String::new(),
    };
    if !report.verdict.is_convergent() && !force {
        row.note = "not simulated".into();
        return Ok(row);
    }
    let sim = simulate(&c, workers)?;
    if let Some(e) = &sim.divergence {
        row.note = format!("diverged at step {}", match e {
            CoreError::Divergence { step, .. } => *step,
            _ => 0,
        });
        row.agreement = report.forecast.map(|_| false);
        return Ok(row);
    }
    let exponential = report.forecast.is_some_and(|f| f.kind == RateKind::Exponential);
    let fits = rate_fits(&sim.rows, c.fit_window, exponential.then_some(x));
    let chosen = if exponential { &fits[2].1 } else { &fits[0].1 };
    match &chosen.fit {
        Ok(f) => {
            row.fitted_rate = Some(-f.slope);
            row.fit_r2 = Some(f.r_squared);
            row.agreement = report.forecast.map(|fc| {
                if exponential {
                    f.slope < 0.0
                } else {
                    -f.slope >= fc.exponent - fc.epsilon_slack
                }
            });
        }
        Err(e) => row.note = format!("fit failed: {e}"),
    }
    Ok(row)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, force: bool, workers: Option<usize>) -> Result<i32> {
    let xs = if cfg.sweep_x.is_empty() { vec![cfg.eta.exponent] } else { cfg.sweep_x.clone() };
    let ys = if !cfg.kind.has_noise() {
        vec![0.0]
    } else if cfg.sweep_y.is_empty() {
        vec![cfg.sigma2.map_or(0.0, |s| s.exponent)]
    } else {
        cfg.sweep_y.clone()
    };
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut text = format!("{SWEEP_HEADER}\n");
    println!("{SWEEP_HEADER}");
    let mut code = EXIT_OK;
    for &x in &xs {
        for &y in &ys {
            let row = sweep_point(cfg, x, y, force, workers)?;
            if row.agreement == Some(false) {
                code = EXIT_FAIL;
            }
            let line = row.csv(cfg.kind);
            println!("{line}");
            text.push_str(&line);
            text.push('\n');
        }
    }
    fs::write(out.join("sweep.csv"), text)?;
    Ok(code)
}
