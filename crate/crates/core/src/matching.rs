//! Vicinity ghost samples: the permutation `pi*` minimizing
//! `sum_n ||z'_{pi(n)} - z_n||_2` between a sample set and its ghost.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VrmError};
use crate::sample::{SampleSet, MAX_POINTS};
use crate::stats::euclidean;

/// Optimal pairing of a sample set `Z` with its ghost `Z'`.
///
/// `permutation[n]` is the index of the ghost point paired with `z_n`, so the
/// pair `s_[n]` is `(z'_{permutation[n]}, z_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
    pub pair_distances: Vec<f64>,
}

impl MatchResult {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// The vicinity ghost samples `z'_{pi*(1)}, ..., z'_{pi*(N)}`.
    pub fn ghost_samples(&self, zprime: &SampleSet) -> SampleSet {
        zprime.reordered(&self.permutation)
    }

    /// Checks that this result was built for sets of the given size.
    pub fn check_sets(&self, z: &SampleSet, zprime: &SampleSet) -> Result<()> {
        check_pair(z, zprime)?;
        if self.len() != z.len() {
            return Err(VrmError::SizeMismatch { left: self.len(), right: z.len() });
        }
        check_permutation(&self.permutation)
    }
}

fn check_pair(z: &SampleSet, zprime: &SampleSet) -> Result<()> {
    z.check_compatible(zprime)?;
    if z.len() != zprime.len() {
        return Err(VrmError::SizeMismatch { left: z.len(), right: zprime.len() });
    }
    Ok(())
}

fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &j in perm {
        if j >= perm.len() || std::mem::replace(&mut seen[j], true) {
            return Err(VrmError::NotAPermutation(perm.len()));
        }
    }
    Ok(())
}

/// `sum_n ||z'_{perm[n]} - z_n||_2`.
pub fn match_cost_of(z: &SampleSet, zprime: &SampleSet, perm: &[usize]) -> Result<f64> {
    check_pair(z, zprime)?;
    if perm.len() != z.len() {
        return Err(VrmError::NotAPermutation(z.len()));
    }
    check_permutation(perm)?;
    Ok(perm.iter().enumerate().map(|(n, &j)| euclidean(zprime.row(j), z.row(n))).sum())
}

/// Exact minimum-cost assignment between `Z` and `Z'` under Euclidean cost on
/// the full joint vectors.
pub fn vicinity_ghost_match(z: &SampleSet, zprime: &SampleSet) -> Result<MatchResult> {
    check_pair(z, zprime)?;
    let n = z.len();
    if n > MAX_POINTS {
        return Err(VrmError::Precondition(format!("matching supports N <= {MAX_POINTS}, got {n}")));
    }
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = euclidean(z.row(i), zprime.row(j));
        }
    }
    let permutation = assign(&cost, n);
    let pair_distances: Vec<f64> = permutation.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect();
    let total_cost = pair_distances.iter().sum();
    Ok(MatchResult { permutation, total_cost, pair_distances })
}

/// Shortest-augmenting-path Hungarian method on a dense `n x n` cost matrix.
/// Returns `row -> column`. Among equal reduced costs the lowest column index
/// wins, which makes the result a deterministic function of the input.
pub fn assign(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based bookkeeping; column 0 is a virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let base = (i0 - 1) * n;
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[base + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![0usize; n];
    for j in 1..=n {
        result[owner[j] - 1] = j - 1;
    }
    result
}
