//! Small statistical helpers shared by the simulation and fitting code.

use rand::Rng;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> f64 {
    (sample_variance(values) / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    median_in_place(&mut v)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty(), "median of empty slice");
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bootstrap standard error of the median.
pub fn bootstrap_median_se<R: Rng + ?Sized>(values: &[f64], resamples: usize, rng: &mut R) -> f64 {
    let n = values.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut buf = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = values[rng.random_range(0..n)];
        }
        stats.push(median_in_place(&mut buf));
    }
    sample_variance(&stats).sqrt()
}

/// Result of an ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = compensated_sum(points.iter().map(|p| p.0)) / n;
    let my = compensated_sum(points.iter().map(|p| p.1)) / n;
    let sxx = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = compensated_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let syy = compensated_sum(points.iter().map(|p| (p.1 - my) * (p.1 - my)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        // A flat response is fitted exactly by the flat line.
        1.0
    };
    LineFit { slope, intercept, r_squared }
}

/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}
