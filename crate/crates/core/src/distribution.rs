//! Synthetic data-generating distributions with exact samplers and, where
//! available, exact marginal CDFs.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VrmError};
use crate::rng::{rng_from_seed, Rng};
use crate::sample::{Provenance, SampleSet, Split};
use crate::stats::normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticDistribution {
    /// Uniform on `[0, 1]^K`.
    UniformCube { input_dim: usize, output_dim: usize },
    /// Independent normal coordinates.
    DiagonalGaussian { input_dim: usize, mean: Vec<f64>, std: Vec<f64> },
    /// Mixture of diagonal Gaussians.
    GaussianMixture { input_dim: usize, weights: Vec<f64>, means: Vec<Vec<f64>>, stds: Vec<Vec<f64>> },
    /// `x ~ U[-1, 1]^I`, `y = <w, x> + noise_std * e` with `e ~ N(0, 1)`.
    LinearRegression { weights: Vec<f64>, noise_std: f64 },
}

impl SyntheticDistribution {
    pub fn uniform_cube(input_dim: usize, output_dim: usize) -> Self {
        Self::UniformCube { input_dim, output_dim }
    }

    pub fn standard_gaussian(input_dim: usize, output_dim: usize) -> Self {
        let k = input_dim + output_dim;
        Self::DiagonalGaussian { input_dim, mean: vec![0.0; k], std: vec![1.0; k] }
    }

    pub fn linear_regression(weights: Vec<f64>, noise_std: f64) -> Self {
        Self::LinearRegression { weights, noise_std }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformCube { .. } => "uniform_cube",
            Self::DiagonalGaussian { .. } => "diagonal_gaussian",
            Self::GaussianMixture { .. } => "gaussian_mixture",
            Self::LinearRegression { .. } => "linear_regression",
        }
    }

    pub fn split(&self) -> Result<Split> {
        match self {
            Self::UniformCube { input_dim, output_dim } => Split::new(*input_dim, *output_dim),
            Self::DiagonalGaussian { input_dim, mean, .. } => {
                Split::new(*input_dim, mean.len().saturating_sub(*input_dim))
            }
            Self::GaussianMixture { input_dim, means, .. } => {
                let k = means.first().map_or(0, Vec::len);
                Split::new(*input_dim, k.saturating_sub(*input_dim))
            }
            Self::LinearRegression { weights, .. } => Split::new(weights.len(), 1),
        }
    }

    /// Checks parameter validity.
    pub fn validate(&self) -> Result<Split> {
        let split = self.split()?;
        let k = split.dim();
        let positive = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != k {
                return Err(VrmError::DimensionMismatch { expected: k, found: v.len() });
            }
            if v.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return invalid(format!("{what} must be finite and positive"));
            }
            Ok(())
        };
        let finite = |v: &[f64]| -> Result<()> {
            if v.len() != k {
                return Err(VrmError::DimensionMismatch { expected: k, found: v.len() });
            }
            if v.iter().any(|m| !m.is_finite()) {
                return invalid("means must be finite");
            }
            Ok(())
        };
        match self {
            Self::UniformCube { .. } => {}
            Self::DiagonalGaussian { mean, std, .. } => {
                finite(mean)?;
                positive(std, "standard deviations")?;
            }
            Self::GaussianMixture { weights, means, stds, .. } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != stds.len() {
                    return invalid("mixture needs matching non-empty weights, means and stds");
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return invalid("mixture weights must be positive");
                }
                for (m, s) in means.iter().zip(stds) {
                    finite(m)?;
                    positive(s, "standard deviations")?;
                }
            }
            Self::LinearRegression { weights, noise_std } => {
                if weights.iter().any(|w| !w.is_finite()) {
                    return invalid("regression weights must be finite");
                }
                if !(noise_std.is_finite() && *noise_std >= 0.0) {
                    return invalid("noise standard deviation must be non-negative");
                }
            }
        }
        Ok(split)
    }

    /// Draws one point into `out` (length `K`).
    pub fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Self::UniformCube { .. } => {
                for v in out.iter_mut() {
                    *v = rng.random::<f64>();
                }
            }
            Self::DiagonalGaussian { mean, std, .. } => {
                for ((v, m), s) in out.iter_mut().zip(mean).zip(std) {
                    let e: f64 = StandardNormal.sample(rng);
                    *v = m + s * e;
                }
            }
            Self::GaussianMixture { weights, means, stds, .. } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut c = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        c = i;
                        break;
                    }
                    u -= w;
                }
                for ((v, m), s) in out.iter_mut().zip(&means[c]).zip(&stds[c]) {
                    let e: f64 = StandardNormal.sample(rng);
                    *v = m + s * e;
                }
            }
            Self::LinearRegression { weights, noise_std } => {
                let i = weights.len();
                let mut y = 0.0;
                for (v, w) in out[..i].iter_mut().zip(weights) {
                    *v = rng.random_range(-1.0..1.0);
                    y += w * *v;
                }
                let e: f64 = StandardNormal.sample(rng);
                out[i] = y + noise_std * e;
            }
        }
    }

    /// Draws `n` points from an existing stream.
    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> Result<SampleSet> {
        let split = self.validate()?;
        if n == 0 {
            return invalid("sample size must be at least 1");
        }
        let k = split.dim();
        let mut data = vec![0.0; n * k];
        for row in data.chunks_exact_mut(k) {
            self.draw_into(rng, row);
        }
        SampleSet::from_flat(data, split, Provenance { generator: self.name().into(), seed: None })
    }

    /// `n` i.i.d. draws; identical arguments give bit-identical output.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleSet> {
        let mut rng = rng_from_seed(seed);
        let set = self.sample_with(n, &mut rng)?;
        Ok(set.with_provenance(Provenance { generator: self.name().into(), seed: Some(seed) }))
    }

    /// Exact marginal CDF `F_k(t)` of coordinate `k` (0-based).
    pub fn marginal_cdf(&self, k: usize, t: f64) -> Result<f64> {
        let split = self.validate()?;
        if k >= split.dim() {
            return Err(VrmError::DimensionMismatch { expected: split.dim(), found: k + 1 });
        }
        if t.is_nan() {
            return invalid("CDF argument is NaN");
        }
        match self {
            Self::UniformCube { .. } => Ok(t.clamp(0.0, 1.0)),
            Self::DiagonalGaussian { mean, std, .. } => Ok(normal_cdf((t - mean[k]) / std[k])),
            Self::GaussianMixture { weights, means, stds, .. } => {
                let total: f64 = weights.iter().sum();
                let f: f64 = weights
                    .iter()
                    .zip(means.iter().zip(stds))
                    .map(|(w, (m, s))| w * normal_cdf((t - m[k]) / s[k]))
                    .sum();
                Ok((f / total).clamp(0.0, 1.0))
            }
            Self::LinearRegression { .. } => Err(VrmError::NoAnalyticCdf("linear_regression")),
        }
    }

    /// Per-coordinate mean.
    pub fn mean(&self) -> Result<Vec<f64>> {
        let split = self.validate()?;
        Ok(match self {
            Self::UniformCube { .. } => vec![0.5; split.dim()],
            Self::DiagonalGaussian { mean, .. } => mean.clone(),
            Self::GaussianMixture { weights, means, .. } => {
                let total: f64 = weights.iter().sum();
                (0..split.dim())
                    .map(|k| weights.iter().zip(means).map(|(w, m)| w * m[k]).sum::<f64>() / total)
                    .collect()
            }
            Self::LinearRegression { .. } => vec![0.0; split.dim()],
        })
    }
}

/// `F_k(t)` for `dist`; see [`SyntheticDistribution::marginal_cdf`].
pub fn true_marginal_cdf(dist: &SyntheticDistribution, k: usize, t: f64) -> Result<f64> {
    dist.marginal_cdf(k, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cube_points_in_range() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        let s = d.sample(3, 7).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.as_flat().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let dists = [
            SyntheticDistribution::uniform_cube(2, 1),
            SyntheticDistribution::standard_gaussian(1, 1),
            SyntheticDistribution::GaussianMixture {
                input_dim: 1,
                weights: vec![0.3, 0.7],
                means: vec![vec![-1.0, 0.0], vec![1.0, 2.0]],
                stds: vec![vec![0.5, 0.5], vec![1.0, 0.2]],
            },
            SyntheticDistribution::linear_regression(vec![1.0, -2.0], 0.1),
        ];
        for d in &dists {
            let a = d.sample(20, 11).unwrap();
            let b = d.sample(20, 11).unwrap();
            let c = d.sample(20, 12).unwrap();
            assert_eq!(a.as_flat(), b.as_flat());
            assert_ne!(a.as_flat(), c.as_flat());
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let d = SyntheticDistribution::DiagonalGaussian { input_dim: 1, mean: vec![0.0, 0.0], std: vec![1.0, 0.0] };
        assert!(d.sample(5, 1).is_err());
        let d = SyntheticDistribution::linear_regression(vec![1.0], -0.5);
        assert!(d.sample(5, 1).is_err());
        assert!(SyntheticDistribution::uniform_cube(1, 1).sample(0, 1).is_err());
    }

    #[test]
    fn gaussian_sample_mean_within_clt_band() {
        let d = SyntheticDistribution::DiagonalGaussian { input_dim: 1, mean: vec![1.0, -2.0], std: vec![0.5, 2.0] };
        let n = 10_000;
        let s = d.sample(n, 1).unwrap();
        for k in 0..2 {
            let m = s.rows().map(|r| r[k]).sum::<f64>() / n as f64;
            let (mu, sd) = match &d {
                SyntheticDistribution::DiagonalGaussian { mean, std, .. } => (mean[k], std[k]),
                _ => unreachable!(),
            };
            assert!((m - mu).abs() <= 4.0 * sd / (n as f64).sqrt(), "coordinate {k}: {m}");
        }
    }

    #[test]
    fn cdf_values_and_limits() {
        let u = SyntheticDistribution::uniform_cube(1, 1);
        assert_eq!(u.marginal_cdf(0, 0.5).unwrap(), 0.5);
        assert_eq!(u.marginal_cdf(1, f64::NEG_INFINITY).unwrap(), 0.0);
        assert_eq!(u.marginal_cdf(1, f64::INFINITY).unwrap(), 1.0);
        let g = SyntheticDistribution::standard_gaussian(1, 1);
        assert_eq!(g.marginal_cdf(0, 0.0).unwrap(), 0.5);
        assert_eq!(g.marginal_cdf(0, f64::NEG_INFINITY).unwrap(), 0.0);
        assert_eq!(g.marginal_cdf(0, f64::INFINITY).unwrap(), 1.0);
        let r = SyntheticDistribution::linear_regression(vec![1.0], 0.1);
        assert_eq!(r.marginal_cdf(0, 0.0), Err(VrmError::NoAnalyticCdf("linear_regression")));
        assert!(u.marginal_cdf(2, 0.0).is_err());
    }

    #[test]
    fn cdfs_monotone_on_grid() {
        let dists = [
            SyntheticDistribution::uniform_cube(1, 2),
            SyntheticDistribution::DiagonalGaussian { input_dim: 1, mean: vec![0.3, -1.0], std: vec![0.2, 3.0] },
            SyntheticDistribution::GaussianMixture {
                input_dim: 1,
                weights: vec![1.0, 2.0],
                means: vec![vec![-1.0, 0.0], vec![1.0, 2.0]],
                stds: vec![vec![0.5, 0.5], vec![1.0, 0.2]],
            },
        ];
        for d in &dists {
            let k_dim = d.split().unwrap().dim();
            for k in 0..k_dim {
                let vals: Vec<f64> =
                    (0..100).map(|i| d.marginal_cdf(k, -5.0 + 10.0 * i as f64 / 99.0).unwrap()).collect();
                assert!(vals.windows(2).all(|w| w[0] <= w[1]));
                assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
