//! CSV and report serialization.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use augopt_core::diagnostics::{fit_exponential, fit_power_law, RateFit};

pub const TRAJECTORY_HEADER: [&str; 13] = [
    "t",
    "eta",
    "sigma2",
    "batch",
    "intrinsic_time",
    "err_par_median",
    "err_par_se",
    "err_total_median",
    "var_trace",
    "var_trace_se",
    "exact_mean_err",
    "exact_var_trace",
    "loss_median",
];

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub eta: f64,
    pub sigma2: Option<f64>,
    pub batch: Option<usize>,
    pub intrinsic_time: f64,
    pub err_par_median: f64,
    pub err_par_se: f64,
    pub err_total_median: f64,
    pub var_trace: f64,
    pub var_trace_se: f64,
    pub exact_mean_err: Option<f64>,
    pub exact_var_trace: Option<f64>,
    pub loss_median: f64,
}

impl TrajectoryRow {
    fn fields(&self) -> [String; 13] {
        [
            self.t.to_string(),
            num(self.eta),
            opt(self.sigma2),
            self.batch.map_or_else(String::new, |b| b.to_string()),
            num(self.intrinsic_time),
            num(self.err_par_median),
            num(self.err_par_se),
            num(self.err_total_median),
            num(self.var_trace),
            num(self.var_trace_se),
            opt(self.exact_mean_err),
            opt(self.exact_var_trace),
            num(self.loss_median),
        ]
    }
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_HEADER {
        bail!("unexpected trajectory header {header:?}");
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().with_context(|| format!("column {} value `{}`", TRAJECTORY_HEADER[i], &rec[i]))
        };
        let o = |i: usize| -> Result<Option<f64>> { if rec[i].is_empty() { Ok(None) } else { f(i).map(Some) } };
        rows.push(TrajectoryRow {
            t: rec[0].parse()?,
            eta: f(1)?,
            sigma2: o(2)?,
            batch: if rec[3].is_empty() { None } else { Some(rec[3].parse()?) },
            intrinsic_time: f(4)?,
            err_par_median: f(5)?,
            err_par_se: f(6)?,
            err_total_median: f(7)?,
            var_trace: f(8)?,
            var_trace_se: f(9)?,
            exact_mean_err: o(10)?,
            exact_var_trace: o(11)?,
            loss_median: f(12)?,
        });
    }
    Ok(rows)
}

/// A named rate fit, or the reason it could not be computed.
#[derive(Debug, Clone)]
pub struct NamedFit {
    pub series: &'static str,
    pub fit: std::result::Result<RateFit, String>,
}

impl NamedFit {
    pub fn line(&self, kind: &str) -> String {
        match &self.fit {
            Ok(f) => format!(
                "fit {} {kind} slope={} intercept={} r2={} window={},{} points={}",
                self.series,
                num(f.slope),
                num(f.intercept),
                num(f.r_squared),
                num(f.window.0),
                num(f.window.1),
                f.points
            ),
            Err(e) => format!("fit {} {kind} unavailable: {e}", self.series),
        }
    }
}

/// Power-law fits of both error medians and, for `Some(x)`, an exponential
/// fit of `err_par` at scale `t^{1−x}`.
pub fn rate_fits(rows: &[TrajectoryRow], window: Option<(f64, f64)>, exponential_x: Option<f64>) -> Vec<(String, NamedFit)> {
    let par: Vec<(f64, f64)> = rows.iter().map(|r| (r.t as f64, r.err_par_median)).collect();
    let total: Vec<(f64, f64)> = rows.iter().map(|r| (r.t as f64, r.err_total_median)).collect();
    let mut out = vec![
        ("power-law".to_string(), NamedFit { series: "err_total", fit: fit_power_law(&total, window).map_err(|e| e.to_string()) }),
        ("power-law".to_string(), NamedFit { series: "err_par", fit: fit_power_law(&par, window).map_err(|e| e.to_string()) }),
    ];
    if let Some(x) = exponential_x {
        out.push((
            format!("exponential(x={})", num(x)),
            NamedFit { series: "err_par", fit: fit_exponential(&par, x, window).map_err(|e| e.to_string()) },
        ));
    }
    out
}

/// Parses the `key=value` tokens of a `fit` report line.
pub fn parse_fit_line(line: &str) -> Option<Vec<(String, String)>> {
    let rest = line.strip_prefix("fit ")?;
    Some(
        rest.split_whitespace()
            .skip(2)
            .filter_map(|tok| tok.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect(),
    )
}

pub fn render_rows_table(rows: &[TrajectoryRow], every: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>10}  {:>14}  {:>14}  {:>14}", "t", "err_par", "err_total", "var_trace");
    for (i, r) in rows.iter().enumerate() {
        if i % every.max(1) == 0 || i + 1 == rows.len() {
            let _ = writeln!(s, "{:>10}  {:>14.6e}  {:>14.6e}  {:>14.6e}", r.t, r.err_par_median, r.err_total_median, r.var_trace);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, -2.5, 1e-300, 6.02e23, 1.0 / 3.0, 123456.789, 1e-5, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v, "{}", num(v));
        }
    }

    #[test]
    fn fit_lines_parse() {
        let e = "fit err_par exponential(x=0.5) slope=-0.1 intercept=0 r2=1 window=10,100 points=7";
        assert_eq!(parse_fit_line(e).unwrap()[0].0, "slope");
        let l = "fit err_total power-law slope=-0.5 intercept=1e-3 r2=1 window=10,100 points=7";
        let kv = parse_fit_line(l).unwrap();
        assert_eq!(kv[0], ("slope".into(), "-0.5".into()));
        assert_eq!(kv.len(), 5);
    }
}
