//! Small numerical helpers shared by the Monte Carlo routines.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        let se = if xs.len() > 1 { (var / xs.len() as f64).sqrt() } else { 0.0 };
        Self { value: mean, std_error: se }
    }

    /// `|self - other| <= k * sqrt(se1^2 + se2^2)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * combined_se(self.std_error, other.std_error)
    }
}

/// Running mean and variance (Welford). A constant stream yields its value
/// exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let delta = v - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.count > 1 { (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt() } else { 0.0 };
        Estimate { value: self.mean, std_error: se }
    }
}

pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Mean and unbiased variance (0 for fewer than two samples).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Binomial proportion with its standard error `sqrt(p(1-p)/n)`.
pub fn proportion(successes: usize, n: usize) -> Estimate {
    let p = successes as f64 / n as f64;
    Estimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt() }
}

/// Ordinary least-squares line `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-t / std::f64::consts::SQRT_2)
}
