//! `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use augopt_core::dynamics::RecordCadence;
use augopt_core::schedule::{BatchRule, PowerLaw, ScheduleSet};
use augopt_core::{AugmentationKind, AugmentationScheme, Dataset, NoiseDistribution, RegressionProblem, SyntheticSpec};

/// A configuration error, anchored to a line when one is to blame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Synthetic(SyntheticSpec),
    /// CSV matrices: inputs `n×N`, labels `p×N`.
    Files { inputs: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t_max: usize,
    pub n_traj: usize,
    pub cadence: RecordCadence,
    pub master_seed: u64,
    /// Seed of the shared initialization `W_0`.
    pub init_seed: u64,
    /// Propagate the exact mean and covariance recursions alongside.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub kind: AugmentationKind,
    pub noise: NoiseDistribution,
    pub eta: PowerLaw,
    pub sigma2: Option<PowerLaw>,
    pub batch: BatchRule,
    pub run: RunSpec,
    pub fit_window: Option<(f64, f64)>,
    pub check_horizon: usize,
    pub sweep_x: Vec<f64>,
    pub sweep_y: Vec<f64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Synthetic(SyntheticSpec::default()),
            kind: AugmentationKind::AdditiveNoise,
            noise: NoiseDistribution::Gaussian,
            eta: PowerLaw { coefficient: 1.0, exponent: 0.65, offset: 1 },
            sigma2: Some(PowerLaw { coefficient: 0.1, exponent: 1.0 / 3.0, offset: 1 }),
            batch: BatchRule::Full,
            run: RunSpec {
                t_max: 10_000,
                n_traj: 64,
                cadence: RecordCadence::LogSpaced { per_decade: 10 },
                master_seed: 0,
                init_seed: 1,
                exact: true,
            },
            fit_window: None,
            check_horizon: 10_000,
            sweep_x: Vec::new(),
            sweep_y: Vec::new(),
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "problem.source",
    "problem.n",
    "problem.samples",
    "problem.outputs",
    "problem.seed",
    "problem.label_noise",
    "problem.inputs",
    "problem.labels",
    "scheme.kind",
    "scheme.noise",
    "schedule.eta.coefficient",
    "schedule.eta.exponent",
    "schedule.eta.offset",
    "schedule.sigma2",
    "schedule.sigma2.coefficient",
    "schedule.sigma2.exponent",
    "schedule.sigma2.offset",
    "schedule.batch.size",
    "schedule.batch.exponent",
    "schedule.batch.offset",
    "run.t_max",
    "run.n_traj",
    "run.record",
    "run.master_seed",
    "run.init_seed",
    "run.exact",
    "fit.window",
    "check.horizon",
    "sweep.x",
    "sweep.y",
    "output.dir",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<(usize, T)>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse::<T>()
                .map(|v| Some((*line, v)))
                .map_err(|e| ConfigError::at(*line, format!("{key}: cannot parse `{raw}`: {e}"))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some((_, v)) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(l, _)| *l)
    }
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(s).ok_or_else(|| ConfigError::at(line, format!("{key}: `{s}` is not a number"))))
        .collect()
}

/// Floats, plus `a/b` fractions such as `1/3`.
fn parse_number(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0.0).then_some(a / b);
    }
    s.parse().ok()
}

fn number(e: &Entries, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
    if let Some((line, raw)) = e.raw(key) {
        *slot = parse_number(raw).ok_or_else(|| ConfigError::at(line, format!("{key}: `{raw}` is not a number")))?;
    }
    Ok(())
}

fn parse_cadence(line: usize, raw: &str) -> Result<RecordCadence, ConfigError> {
    let bad = || ConfigError::at(line, format!("run.record: expected log2, every:K or log:PER_DECADE, got `{raw}`"));
    if raw == "log2" {
        return Ok(RecordCadence::Log2);
    }
    let (head, tail) = raw.split_once(':').ok_or_else(bad)?;
    let k: usize = tail.trim().parse().map_err(|_| bad())?;
    if k == 0 {
        return Err(bad());
    }
    match head.trim() {
        "every" => Ok(RecordCadence::Every(k)),
        "log" => Ok(RecordCadence::LogSpaced { per_decade: k }),
        _ => Err(bad()),
    }
}

fn parse_kind(line: usize, raw: &str) -> Result<AugmentationKind, ConfigError> {
    let aliases = [("gaussian", AugmentationKind::AdditiveNoise), ("sgd", AugmentationKind::Minibatch), ("sgd_noise", AugmentationKind::MinibatchWithNoise)];
    if let Some((_, k)) = aliases.iter().find(|(a, _)| *a == raw) {
        return Ok(*k);
    }
    raw.parse().map_err(|_| {
        let names: Vec<&str> = AugmentationKind::ALL.iter().map(|k| k.name()).collect();
        ConfigError::at(line, format!("scheme.kind: unknown kind `{raw}` (expected one of {})", names.join(", ")))
    })
}

impl ExperimentConfig {
    /// Parses config text. Relative data paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::at(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("{key}: empty value")));
            }
            if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
                return Err(ConfigError::at(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
        }
        Self::from_entries(&Entries { map }, base)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::global(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn from_entries(e: &Entries, base: &Path) -> Result<Self, ConfigError> {
        let mut c = Self::default();

        let source = e.raw("problem.source").map_or(("synthetic", 0), |(l, v)| (v, l));
        c.problem = match source.0 {
            "synthetic" => {
                let mut s = SyntheticSpec::default();
                e.set("problem.n", &mut s.n)?;
                e.set("problem.samples", &mut s.samples)?;
                e.set("problem.outputs", &mut s.outputs)?;
                e.set("problem.seed", &mut s.seed)?;
                number(e, "problem.label_noise", &mut s.label_noise)?;
                if s.samples >= s.n {
                    let line = e.line("problem.samples").or(e.line("problem.n"));
                    return Err(ConfigError {
                        line,
                        message: format!("synthetic generator needs problem.samples < problem.n (got {} >= {})", s.samples, s.n),
                    });
                }
                if s.samples == 0 || s.outputs == 0 {
                    return Err(ConfigError::global("problem.samples and problem.outputs must be positive"));
                }
                ProblemSource::Synthetic(s)
            }
            "files" => {
                let mut paths = Vec::new();
                for key in ["problem.inputs", "problem.labels"] {
                    let (line, raw) = e
                        .raw(key)
                        .ok_or_else(|| ConfigError::at(source.1, format!("problem.source = files requires {key}")))?;
                    let p = base.join(raw);
                    if !p.is_file() {
                        return Err(ConfigError::at(line, format!("{key}: file not found: {}", p.display())));
                    }
                    paths.push(p);
                }
                let labels = paths.pop().expect("two paths");
                let inputs = paths.pop().expect("two paths");
                ProblemSource::Files { inputs, labels }
            }
            other => return Err(ConfigError::at(source.1, format!("problem.source: expected synthetic or files, got `{other}`"))),
        };

        if let Some((line, raw)) = e.raw("scheme.kind") {
            c.kind = parse_kind(line, raw)?;
        }
        c.noise = match e.raw("scheme.noise") {
            Some((line, raw)) => {
                NoiseDistribution::from_str(raw).map_err(|err| ConfigError::at(line, format!("scheme.noise: {err}")))?
            }
            None => NoiseDistribution::Gaussian,
        };

        number(e, "schedule.eta.coefficient", &mut c.eta.coefficient)?;
        number(e, "schedule.eta.exponent", &mut c.eta.exponent)?;
        e.set("schedule.eta.offset", &mut c.eta.offset)?;
        let mut s2 = c.sigma2.expect("default noise schedule");
        number(e, "schedule.sigma2.coefficient", &mut s2.coefficient)?;
        number(e, "schedule.sigma2.exponent", &mut s2.exponent)?;
        e.set("schedule.sigma2.offset", &mut s2.offset)?;
        c.sigma2 = Some(s2);
        if let Some((line, raw)) = e.raw("schedule.sigma2") {
            if raw != "none" {
                return Err(ConfigError::at(line, "schedule.sigma2: only `none` is accepted here; set the .coefficient/.exponent/.offset keys"));
            }
            c.sigma2 = None;
        }
        if c.kind.has_noise() && c.sigma2.is_none() {
            return Err(ConfigError::at(e.line("schedule.sigma2").unwrap_or(0), format!("{} needs a sigma2 schedule", c.kind)));
        }

        if let Some((line, raw)) = e.raw("schedule.batch.size") {
            c.batch = if raw == "full" {
                BatchRule::Full
            } else {
                let b: f64 = parse_number(raw)
                    .filter(|b| *b >= 1.0)
                    .ok_or_else(|| ConfigError::at(line, format!("schedule.batch.size: expected `full` or a positive number, got `{raw}`")))?;
                let mut exponent = 0.0;
                number(e, "schedule.batch.exponent", &mut exponent)?;
                let mut offset = 1u64;
                e.set("schedule.batch.offset", &mut offset)?;
                if e.line("schedule.batch.exponent").is_some() {
                    BatchRule::PowerLaw { coefficient: b, exponent, offset }
                } else if b.fract() == 0.0 {
                    BatchRule::Constant(b as usize)
                } else {
                    return Err(ConfigError::at(line, "schedule.batch.size: constant batch must be an integer"));
                }
            };
        } else if let Some(l) = e.line("schedule.batch.exponent").or(e.line("schedule.batch.offset")) {
            return Err(ConfigError::at(l, "schedule.batch.size is required with a batch exponent or offset"));
        }
        if c.kind.has_batches() && c.batch == BatchRule::Full {
            c.batch = BatchRule::Constant(1);
            if let Some(l) = e.line("schedule.batch.size") {
                return Err(ConfigError::at(l, format!("{} needs a batch size below full", c.kind)));
            }
        }

        e.set("run.t_max", &mut c.run.t_max)?;
        e.set("run.n_traj", &mut c.run.n_traj)?;
        if let Some((line, raw)) = e.raw("run.record") {
            c.run.cadence = parse_cadence(line, raw)?;
        }
        e.set("run.master_seed", &mut c.run.master_seed)?;
        e.set("run.init_seed", &mut c.run.init_seed)?;
        e.set("run.exact", &mut c.run.exact)?;
        if c.run.t_max == 0 {
            return Err(ConfigError::at(e.line("run.t_max").unwrap_or(0), "run.t_max must be positive"));
        }
        if c.run.n_traj < 2 {
            return Err(ConfigError::at(e.line("run.n_traj").unwrap_or(0), "run.n_traj must be at least 2"));
        }

        if let Some((line, raw)) = e.raw("fit.window") {
            let v = parse_list(line, "fit.window", raw)?;
            if v.len() != 2 || !(v[0] > 0.0 && v[0] < v[1]) {
                return Err(ConfigError::at(line, "fit.window: expected `lo, hi` with 0 < lo < hi"));
            }
            c.fit_window = Some((v[0], v[1]));
        }
        e.set("check.horizon", &mut c.check_horizon)?;
        for (key, slot) in [("sweep.x", &mut c.sweep_x), ("sweep.y", &mut c.sweep_y)] {
            if let Some((line, raw)) = e.raw(key) {
                *slot = parse_list(line, key, raw)?;
                if slot.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(ConfigError::at(line, format!("{key}: exponents must be finite and >= 0")));
                }
            }
        }
        if let Some((_, raw)) = e.raw("output.dir") {
            c.output_dir = PathBuf::from(raw);
        }

        c.schedules().map_err(|err| {
            let line = ["schedule.batch.size", "schedule.eta.coefficient", "schedule.sigma2.coefficient"]
                .iter()
                .find_map(|k| e.line(k));
            ConfigError { line, message: format!("schedule: {err}") }
        })?;
        Ok(c)
    }

    pub fn samples(&self) -> Result<usize, ConfigError> {
        match &self.problem {
            ProblemSource::Synthetic(s) => Ok(s.samples),
            ProblemSource::Files { .. } => Ok(self.dataset()?.samples()),
        }
    }

    pub fn dataset(&self) -> Result<Dataset, ConfigError> {
        match &self.problem {
            ProblemSource::Synthetic(s) => s.generate().map_err(|e| ConfigError::global(format!("problem: {e}"))),
            ProblemSource::Files { inputs, labels } => {
                Dataset::load(inputs, labels).map_err(|e| ConfigError::global(format!("problem: {e}")))
            }
        }
    }

    pub fn build_problem(&self) -> Result<RegressionProblem, ConfigError> {
        RegressionProblem::new(self.dataset()?).map_err(|e| ConfigError::global(format!("problem: {e}")))
    }

    pub fn schedules(&self) -> Result<ScheduleSet, ConfigError> {
        let sigma2 = if self.kind.has_noise() { self.sigma2 } else { None };
        ScheduleSet::new(self.eta, sigma2, self.batch, self.samples()?).map_err(|e| ConfigError::global(e.to_string()))
    }

    pub fn scheme(&self) -> Result<AugmentationScheme, ConfigError> {
        AugmentationScheme::new(self.kind, self.noise, self.schedules()?).map_err(|e| ConfigError::global(e.to_string()))
    }

    /// Copy with the schedule exponents replaced (`y` ignored without noise).
    pub fn with_exponents(&self, x: f64, y: f64) -> Self {
        let mut c = self.clone();
        c.eta.exponent = x;
        if let Some(s) = c.sigma2.as_mut() {
            s.exponent = y;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let c = parse(
            "# comment\nscheme.kind = minibatch\nschedule.batch.size = 2\nschedule.eta.exponent = 1/2  # half\nrun.record = every:20\nsweep.x = 0.4, 0.55\n",
        )
        .unwrap();
        assert_eq!(c.kind, AugmentationKind::Minibatch);
        assert_eq!(c.batch, BatchRule::Constant(2));
        assert_eq!(c.eta.exponent, 0.5);
        assert_eq!(c.run.cadence, RecordCadence::Every(20));
        assert_eq!(c.sweep_x, vec![0.4, 0.55]);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("run.t_max = 10\nbogus.key = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("\n\nrun.t_max = ten\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("line 3:"));
        let e = parse("run.n_traj = 4\nrun.n_traj = 5\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("just words\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse("problem.n = 4\nproblem.samples = 8\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("problem.source = files\nproblem.inputs = /nonexistent/x.csv\nproblem.labels = y.csv\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("run.record = sometimes\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn power_law_batch() {
        let c = parse("scheme.kind = minibatch\nschedule.batch.size = 2\nschedule.batch.exponent = -0.2\n").unwrap();
        assert!(matches!(c.batch, BatchRule::PowerLaw { .. }));
        assert!(!c.schedules().unwrap().is_power_law());
    }
}
