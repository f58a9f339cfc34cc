//! CDF distances between points and the ghost-pair concentration experiment.
//!
//! Coordinates are 0-based throughout: `k` ranges over `0..K`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SyntheticDistribution;
use crate::error::{invalid, Result, VrmError};
use crate::matching::{vicinity_ghost_match, MatchResult};
use crate::rng::{derive_seed, rng_from_seed, trial_seed};
use crate::sample::SampleSet;
use crate::stats::{linear_fit, proportion};

/// Marginal empirical CDFs of a reference sample set.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<Vec<f64>>,
    len: usize,
}

impl EmpiricalCdf {
    pub fn new(reference: &SampleSet) -> Self {
        let sorted = (0..reference.dim())
            .map(|k| {
                let mut col: Vec<f64> = reference.rows().map(|r| r[k]).collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        Self { sorted, len: reference.len() }
    }

    pub fn dim(&self) -> usize {
        self.sorted.len()
    }

    /// `(1/N) #{n : z_n^(k) <= t}`.
    pub fn marginal(&self, k: usize, t: f64) -> f64 {
        let count = self.sorted[k].partition_point(|v| *v <= t);
        count as f64 / self.len as f64
    }

    /// Empirical CDF distance `sqrt(sum_k (F_k(t1) - F_k(t2))^2)`, in `[0, sqrt(K)]`.
    pub fn distance(&self, t1: &[f64], t2: &[f64]) -> Result<f64> {
        self.check(t1)?;
        self.check(t2)?;
        Ok(self.distance_unchecked(t1, t2))
    }

    fn distance_unchecked(&self, t1: &[f64], t2: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| {
                let d = self.marginal(k, t1[k]) - self.marginal(k, t2[k]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn check(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.dim() {
            return Err(VrmError::DimensionMismatch { expected: self.dim(), found: t.len() });
        }
        Ok(())
    }
}

pub fn empirical_cdf_marginal(ecdf: &EmpiricalCdf, k: usize, t: f64) -> f64 {
    ecdf.marginal(k, t)
}

pub fn empirical_cdf_distance(ecdf: &EmpiricalCdf, t1: &[f64], t2: &[f64]) -> Result<f64> {
    ecdf.distance(t1, t2)
}

/// CDF distance under the exact marginals of `dist`.
pub fn cdf_distance(dist: &SyntheticDistribution, t1: &[f64], t2: &[f64]) -> Result<f64> {
    let k_dim = dist.validate()?.dim();
    for t in [t1, t2] {
        if t.len() != k_dim {
            return Err(VrmError::DimensionMismatch { expected: k_dim, found: t.len() });
        }
    }
    let mut acc = 0.0;
    for k in 0..k_dim {
        let d = dist.marginal_cdf(k, t1[k])? - dist.marginal_cdf(k, t2[k])?;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// `max_n d_F(z_n, z'_{pi*(n)})` with the empirical CDF of `Z`.
pub fn max_pair_cdf_distance(
    matching: &MatchResult,
    ecdf: &EmpiricalCdf,
    z: &SampleSet,
    zprime: &SampleSet,
) -> Result<f64> {
    matching.check_sets(z, zprime)?;
    if ecdf.dim() != z.dim() {
        return Err(VrmError::DimensionMismatch { expected: ecdf.dim(), found: z.dim() });
    }
    Ok(matching
        .permutation
        .iter()
        .enumerate()
        .map(|(n, &j)| ecdf.distance_unchecked(z.row(n), zprime.row(j)))
        .fold(0.0, f64::max))
}

/// Draws `Z`, `Z'` of size `n`, matches them and returns the max-pair statistic.
pub fn ghost_pair_statistic(dist: &SyntheticDistribution, n: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let z = dist.sample_with(n, &mut rng)?;
    let zprime = dist.sample_with(n, &mut rng)?;
    let m = vicinity_ghost_match(&z, &zprime)?;
    max_pair_cdf_distance(&m, &EmpiricalCdf::new(&z), &z, &zprime)
}

/// The statistic for `trials` independent draws. Trial `t` uses seed
/// `derive_seed(seed + t, n)`.
pub fn ghost_pair_statistics(dist: &SyntheticDistribution, n: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|t| ghost_pair_statistic(dist, n, derive_seed(trial_seed(seed, t), n as u64)))
        .collect()
}

/// Fraction of trials in which every matched pair lies within `radius`
/// (the event that all pairs share a cover element).
pub fn all_pairs_within(dist: &SyntheticDistribution, n: usize, radius: f64, trials: usize, seed: u64) -> Result<f64> {
    let stats = ghost_pair_statistics(dist, n, trials, seed)?;
    Ok(stats.iter().filter(|s| **s <= radius).count() as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub trials: usize,
    pub tail_estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub xi: f64,
    pub dim: usize,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln(tail)` against `N` over positive tails;
    /// absent with fewer than three positive tails.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `exp(intercept)`, the fitted multiplicative constant.
    pub fitted_constant: Option<f64>,
    /// Asymptotic exponential rate `-xi^2 / (2K)`.
    pub predicted_rate: f64,
}

impl DecayReport {
    /// Tails nonincreasing in `N` up to `tolerance`.
    pub fn tails_nonincreasing(&self, tolerance: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].tail_estimate <= w[0].tail_estimate + tolerance)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,trials,tail_estimate,stderr\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.n, r.trials, r.tail_estimate, r.stderr));
        }
        out
    }
}

/// For each `N`, the fraction of trials whose max-pair statistic exceeds `xi`.
pub fn dkw_decay_experiment(
    dist: &SyntheticDistribution,
    n_grid: &[usize],
    xi: f64,
    trials: usize,
    seed: u64,
) -> Result<DecayReport> {
    if n_grid.is_empty() {
        return invalid("N grid is empty");
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return invalid("xi must be positive");
    }
    if trials < 100 {
        return Err(VrmError::Precondition(format!("trials = {trials} < 100")));
    }
    let dim = dist.validate()?.dim();
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let stats = ghost_pair_statistics(dist, n, trials, seed)?;
        let p = proportion(stats.iter().filter(|s| **s > xi).count(), trials);
        rows.push(DecayRow { n, trials, tail_estimate: p.value, stderr: p.std_error });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.tail_estimate > 0.0).map(|r| (r.n as f64, r.tail_estimate.ln())).unzip();
    let fit = if xs.len() >= 3 { linear_fit(&xs, &ys) } else { None };
    Ok(DecayReport {
        xi,
        dim,
        rows,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        fitted_constant: fit.map(|f| f.1.exp()),
        predicted_rate: -xi * xi / (2.0 * dim as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Split;

    fn two_points() -> SampleSet {
        SampleSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]], Split::new(1, 1).unwrap()).unwrap()
    }

    #[test]
    fn marginal_counts() {
        let e = EmpiricalCdf::new(&two_points());
        assert_eq!(e.marginal(0, -1.0), 0.0);
        assert_eq!(e.marginal(0, 0.0), 0.5);
        assert_eq!(e.marginal(0, 1.0), 1.0);
        assert_eq!(e.marginal(1, 0.99), 0.5);
    }

    #[test]
    fn distance_examples() {
        let e = EmpiricalCdf::new(&two_points());
        assert_eq!(e.distance(&[0.3, 0.1], &[0.3, 0.1]).unwrap(), 0.0);
        let d = e.distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(e.distance(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn analytic_distance() {
        let u = SyntheticDistribution::uniform_cube(1, 1);
        assert_eq!(cdf_distance(&u, &[0.2, 0.2], &[0.2, 0.2]).unwrap(), 0.0);
        assert!((cdf_distance(&u, &[0.0, 0.0], &[1.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let r = SyntheticDistribution::linear_regression(vec![1.0], 0.1);
        assert!(matches!(cdf_distance(&r, &[0.0, 0.0], &[1.0, 1.0]), Err(VrmError::NoAnalyticCdf(_))));
    }

    #[test]
    fn statistic_zero_for_self_match() {
        let z = SyntheticDistribution::uniform_cube(1, 1).sample(40, 9).unwrap();
        let m = vicinity_ghost_match(&z, &z).unwrap();
        assert_eq!(max_pair_cdf_distance(&m, &EmpiricalCdf::new(&z), &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn statistic_is_max_over_pairs() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        let z = d.sample(25, 1).unwrap();
        let zp = d.sample(25, 2).unwrap();
        let m = vicinity_ghost_match(&z, &zp).unwrap();
        let e = EmpiricalCdf::new(&z);
        let stat = max_pair_cdf_distance(&m, &e, &z, &zp).unwrap();
        for (n, &j) in m.permutation.iter().enumerate() {
            assert!(stat >= e.distance(z.row(n), zp.row(j)).unwrap());
        }
    }

    #[test]
    fn decay_validation_and_trivial_tail() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        assert!(dkw_decay_experiment(&d, &[], 0.3, 100, 1).is_err());
        assert!(dkw_decay_experiment(&d, &[10], 0.3, 99, 1).is_err());
        let r = dkw_decay_experiment(&d, &[5, 10], 2f64.sqrt(), 100, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.tail_estimate == 0.0));
        assert_eq!(r.slope, None);
        assert!(r.to_csv().starts_with("N,trials,tail_estimate,stderr\n"));
    }
}
