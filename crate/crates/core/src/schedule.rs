//! Learning-rate, noise-level and batch-size schedules.

use crate::error::{Error, Result};
use crate::stats::NeumaierSum;

/// `coefficient · (t + offset)^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
    pub offset: u64,
}

impl PowerLaw {
    pub fn new(coefficient: f64, exponent: f64, offset: u64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient must be > 0, got {coefficient}")));
        }
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponent must be >= 0, got {exponent}")));
        }
        if offset < 1 {
            return Err(Error::InvalidParameter("offset must be >= 1".into()));
        }
        Ok(Self { coefficient, exponent, offset })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, 0.0, 1)
    }

    #[inline]
    pub fn value(&self, t: usize) -> f64 {
        if self.exponent == 0.0 {
            self.coefficient
        } else {
            self.coefficient * ((t as u64 + self.offset) as f64).powf(-self.exponent)
        }
    }
}

/// Batch size rule; the size is always clamped to `[1, N]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchRule {
    /// Use all `N` samples.
    Full,
    Constant(usize),
    /// `round(coefficient · (t + offset)^(−exponent))`; a negative exponent
    /// gives a growing batch.
    PowerLaw { coefficient: f64, exponent: f64, offset: u64 },
}

/// Hyperparameters in effect at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub eta: f64,
    pub sigma2: f64,
    pub batch: usize,
}

/// The joint schedule `(η_t, σ_t², B_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSet {
    pub eta: PowerLaw,
    /// `None` means `σ_t² ≡ 0`.
    pub sigma2: Option<PowerLaw>,
    pub batch: BatchRule,
    samples: usize,
}

impl ScheduleSet {
    /// `samples` is the dataset size `N`, the upper clamp for batch sizes.
    pub fn new(eta: PowerLaw, sigma2: Option<PowerLaw>, batch: BatchRule, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("sample count must be positive".into()));
        }
        match batch {
            BatchRule::Constant(b) if b == 0 || b > samples => {
                return Err(Error::InvalidParameter(format!("batch size {b} outside [1, {samples}]")));
            }
            BatchRule::PowerLaw { coefficient, exponent, offset }
                if !(coefficient > 0.0 && coefficient.is_finite() && exponent.is_finite() && offset >= 1) =>
            {
                return Err(Error::InvalidParameter("invalid batch power law".into()));
            }
            _ => {}
        }
        Ok(Self { eta, sigma2, batch, samples })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    #[inline]
    pub fn eval(&self, t: usize) -> StepParams {
        StepParams {
            eta: self.eta.value(t),
            sigma2: self.sigma2.map_or(0.0, |s| s.value(t)),
            batch: self.batch_at(t),
        }
    }

    #[inline]
    pub fn batch_at(&self, t: usize) -> usize {
        match self.batch {
            BatchRule::Full => self.samples,
            BatchRule::Constant(b) => b,
            BatchRule::PowerLaw { coefficient, exponent, offset } => {
                let v = coefficient * ((t as u64 + offset) as f64).powf(-exponent);
                (v.round().max(1.0) as usize).min(self.samples)
            }
        }
    }

    /// True when every component is a pure power law with constant batch,
    /// so convergence conditions can be decided symbolically.
    pub fn is_power_law(&self) -> bool {
        !matches!(self.batch, BatchRule::PowerLaw { .. })
    }
}

/// `τ(t) = Σ_{s<t} (2η_s/N) λ_s`.
pub fn intrinsic_time(s: &ScheduleSet, lambda: impl Fn(usize) -> f64, samples: usize, t: usize) -> Result<f64> {
    let mut acc = NeumaierSum::default();
    let scale = 2.0 / samples as f64;
    for step in 0..t {
        let l = lambda(step);
        if l < 0.0 || l.is_nan() {
            return Err(Error::InvalidParameter(format!("negative eigenvalue {l} at step {step}")));
        }
        acc.add(scale * s.eta.value(step) * l);
    }
    Ok(acc.value())
}

/// `Σ_{t<t_max} series(t)` with compensated summation.
pub fn partial_sum(series: impl Fn(usize) -> f64, t_max: usize) -> f64 {
    let mut acc = NeumaierSum::default();
    for t in 0..t_max {
        acc.add(series(t));
    }
    acc.value()
}

/// Growth of a nonnegative series over geometric blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    /// Slope of `log Σ_{[2^k, 2^{k+1})} series` against `log 2^k` over the
    /// tail blocks. For `series(t) ~ t^{−a}` this is `1 − a`, so the series
    /// diverges iff the exponent is `≥ 0`. `−∞` when the tail is zero.
    pub exponent: f64,
    pub partial_sum: f64,
    pub blocks_used: usize,
}

impl GrowthEstimate {
    pub fn suggests_divergence(&self) -> bool {
        self.exponent > 0.0
    }
}

/// Heuristic divergence test for `Σ series(t)` up to `horizon`.
///
/// Uses the upper half of the dyadic blocks (at least three) so that the
/// finite-offset transient does not bias the slope.
pub fn growth_exponent(series: impl Fn(usize) -> f64, horizon: usize) -> GrowthEstimate {
    let mut total = NeumaierSum::default();
    let mut blocks: Vec<(f64, f64)> = Vec::new();
    let mut start = 1usize;
    if horizon > 0 {
        total.add(series(0));
    }
    while start < horizon {
        let end = (2 * start).min(horizon);
        if end - start < start {
            // Partial trailing block would bias the fit.
            for t in start..end {
                total.add(series(t));
            }
            break;
        }
        let mut block = NeumaierSum::default();
        for t in start..end {
            block.add(series(t));
        }
        total.add(block.value());
        blocks.push(((start as f64).ln(), block.value()));
        start = end;
    }
    let tail_from = (blocks.len() / 2).min(blocks.len().saturating_sub(3));
    let tail = &blocks[tail_from..];
    let exponent = if tail.iter().all(|&(_, v)| v == 0.0) {
        f64::NEG_INFINITY
    } else if tail.iter().any(|&(_, v)| v <= 0.0) || tail.len() < 2 {
        f64::NAN
    } else {
        let pts: Vec<(f64, f64)> = tail.iter().map(|&(x, v)| (x, v.ln())).collect();
        crate::stats::least_squares(&pts).slope
    };
    GrowthEstimate { exponent, partial_sum: total.value(), blocks_used: tail.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eta_only(c: f64, e: f64) -> ScheduleSet {
        ScheduleSet::new(PowerLaw::new(c, e, 1).unwrap(), None, BatchRule::Full, 4).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eta_only(0.1, 0.0).eval(7).eta, 0.1);
        assert_eq!(eta_only(1.0, 0.65).eval(0).eta, 1.0);
        let third = PowerLaw::new(1.0, 1.0 / 3.0, 1).unwrap();
        assert!((third.value(7) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(PowerLaw::new(0.0, 1.0, 1).is_err());
        assert!(PowerLaw::new(1.0, -0.1, 1).is_err());
        assert!(PowerLaw::new(1.0, 0.1, 0).is_err());
        let eta = PowerLaw::constant(0.1).unwrap();
        assert!(ScheduleSet::new(eta, None, BatchRule::Constant(5), 4).is_err());
        assert!(ScheduleSet::new(eta, None, BatchRule::Constant(0), 4).is_err());
    }

    #[test]
    fn batch_power_law_clamps() {
        let eta = PowerLaw::constant(0.1).unwrap();
        let s = ScheduleSet::new(
            eta,
            None,
            BatchRule::PowerLaw { coefficient: 1.0, exponent: -0.5, offset: 1 },
            8,
        )
        .unwrap();
        assert_eq!(s.batch_at(0), 1);
        assert_eq!(s.batch_at(15), 4);
        assert_eq!(s.batch_at(10_000), 8);
    }

    #[test]
    fn intrinsic_time_examples() {
        let s = eta_only(0.1, 0.0);
        assert!((intrinsic_time(&s, |_| 1.0, 2, 5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(intrinsic_time(&s, |_| 1.0, 2, 0).unwrap(), 0.0);
        assert!(intrinsic_time(&s, |_| -1.0, 2, 3).is_err());
    }

    #[test]
    fn growth_exponent_zero_series() {
        let g = growth_exponent(|_| 0.0, 1000);
        assert_eq!(g.exponent, f64::NEG_INFINITY);
        assert_eq!(g.partial_sum, 0.0);
        assert_eq!(partial_sum(|_| 0.0, 1000), 0.0);
    }
}
