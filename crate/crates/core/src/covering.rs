//! Empirical l1 covers, the difference class `P`, the covering-number
//! sandwich and uniform-entropy-number search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SyntheticDistribution;
use crate::error::{invalid, Result, VrmError};
use crate::function::{Hypothesis, PointFunction};
use crate::matching::{vicinity_ghost_match, MatchResult};
use crate::rng::{derive_seed, rng_from_seed, trial_seed};
use crate::sample::{Provenance, SampleSet, MAX_DIM};
use crate::stats::Estimate;
use crate::vicinity::{Scope, VicinitySpec};

/// Largest row count accepted by the exact cover search.
pub const MAX_EXACT_ROWS: usize = 20;

/// Values of a list of functions at a list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EvaluationMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("evaluation matrix needs at least one row and one column");
        }
        if data.len() != rows * cols {
            return Err(VrmError::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("evaluation matrix entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return invalid("ragged evaluation matrix");
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Entry `(i, n) = f_i(z_n)`.
    pub fn from_class<F: PointFunction>(fs: &[F], z: &SampleSet) -> Result<Self> {
        let data = fs.iter().flat_map(|f| z.rows().map(move |r| f.eval(r))).collect();
        Self::new(fs.len(), z.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.data[i * self.cols + n]
    }

    /// `(1/M) sum_m |A[i, m] - A[j, m]|`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let s: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| (a - b).abs()).sum();
        s / self.cols as f64
    }

    /// Mean of row `i`.
    pub fn row_mean(&self, i: usize) -> f64 {
        self.row(i).iter().sum::<f64>() / self.cols as f64
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in i + 1..self.rows {
                d = d.max(self.distance(i, j));
            }
        }
        d
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for n in 1..=self.cols {
            out.push_str(&format!(",c_{n}"));
        }
        out.push('\n');
        for i in 0..self.rows {
            out.push_str(&i.to_string());
            for v in self.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn l1_distance(matrix: &EvaluationMatrix, i: usize, j: usize) -> Result<f64> {
    if i >= matrix.rows || j >= matrix.rows {
        return invalid(format!("row index out of range for {} rows", matrix.rows));
    }
    Ok(matrix.distance(i, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    Exact,
    Greedy,
}

/// A proper cover: centers are rows of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub radius: f64,
    /// Center row indices, ascending.
    pub centers: Vec<usize>,
    pub size: usize,
    pub method: CoverMethod,
}

impl CoverResult {
    /// Checks that every row lies within `radius` of some center.
    pub fn is_cover_of(&self, matrix: &EvaluationMatrix) -> bool {
        (0..matrix.rows).all(|i| self.centers.iter().any(|&c| matrix.distance(c, i) <= self.radius))
    }
}

fn check_radius(xi: f64) -> Result<()> {
    if !(xi > 0.0) || xi.is_nan() {
        return invalid("cover radius must be positive");
    }
    Ok(())
}

/// Size of a greedy `2 xi`-separated set, a lower bound on every `xi` cover.
pub fn packing_lower_bound(matrix: &EvaluationMatrix, xi: f64) -> usize {
    let mut packed: Vec<usize> = Vec::new();
    for i in 0..matrix.rows {
        if packed.iter().all(|&p| matrix.distance(p, i) > 2.0 * xi) {
            packed.push(i);
        }
    }
    packed.len()
}

fn greedy_cover(matrix: &EvaluationMatrix, xi: f64) -> Vec<usize> {
    let mut centers = vec![0];
    let mut near: Vec<f64> = (0..matrix.rows).map(|i| matrix.distance(0, i)).collect();
    loop {
        let (far, d) = near.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &d)| {
                if d > best.1 {
                    (i, d)
                } else {
                    best
                }
            },
        );
        if d <= xi {
            break;
        }
        centers.push(far);
        for (i, v) in near.iter_mut().enumerate() {
            *v = v.min(matrix.distance(far, i));
        }
    }
    centers.sort_unstable();
    centers
}

/// Depth-limited search: cover the lowest uncovered row, trying candidate
/// centers in index order.
fn search(reach: &[u32], uncovered: u32, depth: usize, max_reach: u32, chosen: &mut Vec<usize>) -> bool {
    if uncovered == 0 {
        return true;
    }
    if depth == 0 || (depth as u32) * max_reach < uncovered.count_ones() {
        return false;
    }
    let row = uncovered.trailing_zeros();
    for (c, &mask) in reach.iter().enumerate() {
        if mask & (1 << row) == 0 {
            continue;
        }
        chosen.push(c);
        if search(reach, uncovered & !mask, depth - 1, max_reach, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn exact_cover(matrix: &EvaluationMatrix, xi: f64) -> Vec<usize> {
    let n = matrix.rows;
    let reach: Vec<u32> =
        (0..n).map(|c| (0..n).filter(|&i| matrix.distance(c, i) <= xi).fold(0u32, |m, i| m | (1 << i))).collect();
    let max_reach = reach.iter().map(|m| m.count_ones()).max().unwrap_or(1);
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let upper = greedy_cover(matrix, xi).len();
    for k in packing_lower_bound(matrix, xi)..=upper {
        let mut chosen = Vec::with_capacity(k);
        if search(&reach, all, k, max_reach, &mut chosen) {
            chosen.sort_unstable();
            return chosen;
        }
    }
    unreachable!("the greedy cover has size {upper}")
}

/// Covering number of the rows of `matrix` at radius `xi` under the
/// mean-normalized l1 distance.
pub fn covering_number(matrix: &EvaluationMatrix, xi: f64, method: CoverMethod) -> Result<CoverResult> {
    check_radius(xi)?;
    let centers = match method {
        CoverMethod::Greedy => greedy_cover(matrix, xi),
        CoverMethod::Exact => {
            if matrix.rows > MAX_EXACT_ROWS {
                return Err(VrmError::Precondition(format!(
                    "exact covering supports at most {MAX_EXACT_ROWS} rows, got {}",
                    matrix.rows
                )));
            }
            exact_cover(matrix, xi)
        }
    };
    Ok(CoverResult { radius: xi, size: centers.len(), centers, method })
}

/// The difference class `P = {s = (z1, z2) -> f(z1) - phi(f, z2)}` of a finite
/// base class, with `phi` frozen: position `n` uses the draws of
/// `derive_seed(seed, n)` for every member.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceClass {
    pub base: Vec<Hypothesis>,
    pub spec: VicinitySpec,
    pub phi_draws: usize,
    pub seed: u64,
}

impl DifferenceClass {
    pub fn new(base: Vec<Hypothesis>, spec: VicinitySpec, phi_draws: usize, seed: u64) -> Result<Self> {
        if base.is_empty() {
            return invalid("base class must be non-empty");
        }
        if phi_draws == 0 {
            return invalid("phi_draws must be at least 1");
        }
        Ok(Self { base, spec, phi_draws, seed })
    }

    fn check(&self, z: &SampleSet) -> Result<()> {
        self.base.iter().try_for_each(|h| h.validate(z.split()))?;
        self.spec.resolve(z.split(), Some(z)).map(|_| ())
    }

    /// `phi(f_i, z_n)` for all `i` (outer index `n`); mixup partners come from `z`.
    pub fn phi_table(&self, z: &SampleSet) -> Result<Vec<Vec<Estimate>>> {
        self.check(z)?;
        let vic = self.spec.resolve(z.split(), Some(z))?;
        Ok(z.rows()
            .enumerate()
            .map(|(n, a)| vic.phi_all(&self.base, a, self.phi_draws, derive_seed(self.seed, n as u64)))
            .collect())
    }

    /// Entry `(i, n) = f_i(z1_n) - phi(f_i, z2_n)` for explicit pairs.
    pub fn evaluate_pairs(&self, first: &SampleSet, second: &SampleSet) -> Result<EvaluationMatrix> {
        first.check_compatible(second)?;
        if first.len() != second.len() {
            return Err(VrmError::SizeMismatch { left: first.len(), right: second.len() });
        }
        let phis = self.phi_table(second)?;
        let data = self
            .base
            .iter()
            .enumerate()
            .flat_map(|(i, h)| {
                let phis = &phis;
                first.rows().enumerate().map(move |(n, z1)| h.eval(z1) - phis[n][i].value)
            })
            .collect();
        EvaluationMatrix::new(self.base.len(), first.len(), data)
    }

    /// The matrix on `S+ = {(z'_{pi(n)}, z_n)}`.
    pub fn evaluate(&self, z: &SampleSet, zprime: &SampleSet, matching: &MatchResult) -> Result<EvaluationMatrix> {
        matching.check_sets(z, zprime)?;
        self.evaluate_pairs(&matching.ghost_samples(zprime), z)
    }

    /// Base class on `z`, the `l1(Z)` structure.
    pub fn base_matrix(&self, z: &SampleSet) -> Result<EvaluationMatrix> {
        EvaluationMatrix::from_class(&self.base, z)
    }
}

pub fn build_difference_matrix(
    base: &[Hypothesis],
    spec: &VicinitySpec,
    z: &SampleSet,
    zprime: &SampleSet,
    matching: &MatchResult,
    phi_draws: usize,
    seed: u64,
) -> Result<EvaluationMatrix> {
    DifferenceClass::new(base.to_vec(), spec.clone(), phi_draws, seed)?.evaluate(z, zprime, matching)
}

/// `max |phi(f, z) - phi(h, z)| / |f(z) - h(z)|` over member pairs and points
/// of `z`, skipping denominators below `1e-9`. A lower estimate of the
/// Lipschitz constant of `phi`.
pub fn estimate_lipschitz_lambda(dc: &DifferenceClass, z: &SampleSet) -> Result<f64> {
    if dc.base.len() < 2 {
        return Err(VrmError::Precondition("need at least two hypotheses".into()));
    }
    let phis = dc.phi_table(z)?;
    let mut best: Option<f64> = None;
    for (n, row) in z.rows().enumerate() {
        let vals: Vec<f64> = dc.base.iter().map(|h| h.eval(row)).collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                let den = (vals[i] - vals[j]).abs();
                if den < 1e-9 {
                    continue;
                }
                let ratio = (phis[n][i].value - phis[n][j].value).abs() / den;
                best = Some(best.map_or(ratio, |b| b.max(ratio)));
            }
        }
    }
    best.ok_or_else(|| VrmError::Degenerate("every pair of hypotheses agrees on every point".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub xi: f64,
    pub lambda_hat: f64,
    /// `N(P, xi, l1(S+))`.
    pub covering_p: usize,
    pub upper_radius: f64,
    /// `N(F, xi / (2 + lambda), l1(Z))`.
    pub covering_f_upper: usize,
    pub upper_holds: bool,
    /// `xi / (1 - lambda)`, present when `lambda < 1`.
    pub lower_radius: Option<f64>,
    pub covering_f_lower: Option<usize>,
    pub lower_holds: Option<bool>,
}

/// Exact covering numbers on both sides of the Lipschitz sandwich.
pub fn verify_covering_sandwich(
    dc: &DifferenceClass,
    z: &SampleSet,
    zprime: &SampleSet,
    xi: f64,
    lambda_hat: f64,
) -> Result<SandwichReport> {
    check_radius(xi)?;
    if !(lambda_hat >= 0.0 && lambda_hat.is_finite()) {
        return invalid("lambda must be finite and non-negative");
    }
    let matching = vicinity_ghost_match(z, zprime)?;
    let p = dc.evaluate(z, zprime, &matching)?;
    let f = dc.base_matrix(z)?;
    let covering_p = covering_number(&p, xi, CoverMethod::Exact)?.size;
    let upper_radius = xi / (2.0 + lambda_hat);
    let covering_f_upper = covering_number(&f, upper_radius, CoverMethod::Exact)?.size;
    let (lower_radius, covering_f_lower, lower_holds) = if lambda_hat > 0.0 && lambda_hat < 1.0 {
        let r = xi / (1.0 - lambda_hat);
        let c = covering_number(&f, r, CoverMethod::Exact)?.size;
        (Some(r), Some(c), Some(c <= covering_p))
    } else {
        (None, None, None)
    };
    Ok(SandwichReport {
        xi,
        lambda_hat,
        covering_p,
        upper_radius,
        covering_f_upper,
        upper_holds: covering_p <= covering_f_upper,
        lower_radius,
        covering_f_lower,
        lower_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UenMode {
    /// Free configurations plus every within-cover configuration.
    Unconstrained,
    /// Each pair drawn inside one Euclidean ball of the query radius.
    WithinCover,
}

/// Search settings for [`uen_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UenQuery {
    pub xi: f64,
    /// Points per configuration.
    pub n: usize,
    /// Ball radius `r` of the within-cover configurations.
    pub radius: f64,
    /// Candidates per configuration kind.
    pub budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    Within,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UenTraceRow {
    pub candidate: usize,
    pub kind: CandidateKind,
    pub size: usize,
    pub incumbent: usize,
}

/// Best covering number found; a lower estimate of the true maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UenResult {
    pub mode: UenMode,
    pub query: UenQuery,
    pub value: usize,
    pub trace: Vec<UenTraceRow>,
}

impl UenResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("candidate,kind,size,incumbent\n");
        for r in &self.trace {
            let kind = match r.kind {
                CandidateKind::Within => "within",
                CandidateKind::Free => "free",
            };
            out.push_str(&format!("{},{kind},{},{}\n", r.candidate, r.size, r.incumbent));
        }
        out
    }
}

fn within_candidate(dc: &DifferenceClass, domain: &SyntheticDistribution, q: &UenQuery, i: usize) -> Result<usize> {
    let split = domain.validate()?;
    let k = split.dim();
    let ball = VicinitySpec::uniform_ball(q.radius).with_scope(Scope::Joint);
    let vic = ball.resolve(split, None)?;
    let mut rng = rng_from_seed(derive_seed(q.seed, 2 * i as u64));
    let mut first = vec![0.0; q.n * k];
    let mut second = vec![0.0; q.n * k];
    let mut center = [0.0f64; MAX_DIM];
    for n in 0..q.n {
        domain.draw_into(&mut rng, &mut center[..k]);
        vic.perturb(&center[..k], &mut rng, &mut first[n * k..(n + 1) * k]);
        vic.perturb(&center[..k], &mut rng, &mut second[n * k..(n + 1) * k]);
    }
    let prov = Provenance { generator: "uen_within".into(), seed: Some(q.seed) };
    let first = SampleSet::from_flat(first, split, prov.clone())?;
    let second = SampleSet::from_flat(second, split, prov)?;
    let p = dc.evaluate_pairs(&first, &second)?;
    Ok(covering_number(&p, q.xi, CoverMethod::Exact)?.size)
}

fn free_candidate(dc: &DifferenceClass, domain: &SyntheticDistribution, q: &UenQuery, i: usize) -> Result<usize> {
    let mut rng = rng_from_seed(derive_seed(q.seed, 2 * i as u64 + 1));
    let z = domain.sample_with(q.n, &mut rng)?;
    let zprime = domain.sample_with(q.n, &mut rng)?;
    let m = vicinity_ghost_match(&z, &zprime)?;
    let p = dc.evaluate(&z, &zprime, &m)?;
    Ok(covering_number(&p, q.xi, CoverMethod::Exact)?.size)
}

/// Random search for the largest exact `N(P, xi, l1(S+))` over point
/// configurations drawn from `domain`. Candidate `i` depends only on
/// `(seed, i)`, so a larger budget never lowers the result, and the
/// unconstrained pool contains the within-cover pool.
pub fn uen_estimate(
    dc: &DifferenceClass,
    domain: &SyntheticDistribution,
    query: UenQuery,
    mode: UenMode,
) -> Result<UenResult> {
    if query.budget == 0 {
        return invalid("search budget must be at least 1");
    }
    check_radius(query.xi)?;
    if query.n == 0 {
        return invalid("configurations need at least one point");
    }
    if !(query.radius > 0.0 && query.radius.is_finite()) {
        return invalid("cover radius r must be positive");
    }
    if dc.base.len() > MAX_EXACT_ROWS {
        return Err(VrmError::Precondition(format!("at most {MAX_EXACT_ROWS} hypotheses")));
    }
    let mut jobs: Vec<(usize, CandidateKind)> = Vec::new();
    for i in 0..query.budget {
        jobs.push((i, CandidateKind::Within));
        if mode == UenMode::Unconstrained {
            jobs.push((i, CandidateKind::Free));
        }
    }
    let sizes: Vec<usize> = jobs
        .par_iter()
        .map(|&(i, kind)| match kind {
            CandidateKind::Within => within_candidate(dc, domain, &query, i),
            CandidateKind::Free => free_candidate(dc, domain, &query, i),
        })
        .collect::<Result<_>>()?;
    let mut incumbent = 0;
    let trace = jobs
        .iter()
        .zip(&sizes)
        .map(|(&(candidate, kind), &size)| {
            incumbent = incumbent.max(size);
            UenTraceRow { candidate, kind, size, incumbent }
        })
        .collect();
    Ok(UenResult { mode, query, value: incumbent, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// Monte Carlo mean of `N(P, xi, l1(S+))` over fresh `(Z, Z')`.
    pub lhs: Estimate,
    pub uen_within: usize,
    pub uen_unconstrained: usize,
    pub c: f64,
    /// `exp(-N r^2 / (2K))`.
    pub weight: f64,
    pub rhs: f64,
    pub holds: bool,
    /// The UEN terms come from a finite search and only bound the true
    /// maxima from below.
    pub caveat: String,
}

/// `uen_within + c exp(-N r^2 / 2K) uen_unconstrained`.
pub fn lemma1_rhs(uen_within: f64, uen_unconstrained: f64, n: usize, r: f64, k: usize, c: f64) -> f64 {
    uen_within + c * (-(n as f64) * r * r / (2.0 * k as f64)).exp() * uen_unconstrained
}

/// Compares the expected covering number of `P` with its UEN bound.
pub fn lemma1_bound_check(
    dc: &DifferenceClass,
    dist: &SyntheticDistribution,
    query: UenQuery,
    trials: usize,
    c: f64,
) -> Result<Lemma1Report> {
    if trials < 50 {
        return Err(VrmError::Precondition(format!("trials = {trials} < 50")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return invalid("constant c must be positive");
    }
    let within = uen_estimate(dc, dist, query, UenMode::WithinCover)?.value;
    let unconstrained = uen_estimate(dc, dist, query, UenMode::Unconstrained)?.value;
    let sizes: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = rng_from_seed(derive_seed(trial_seed(query.seed, t), 0x4c45_4d31));
            let z = dist.sample_with(query.n, &mut rng)?;
            let zprime = dist.sample_with(query.n, &mut rng)?;
            let m = vicinity_ghost_match(&z, &zprime)?;
            let p = dc.evaluate(&z, &zprime, &m)?;
            Ok(covering_number(&p, query.xi, CoverMethod::Exact)?.size as f64)
        })
        .collect::<Result<_>>()?;
    let lhs = Estimate::from_samples(&sizes);
    let k = dist.validate()?.dim();
    let weight = (-(query.n as f64) * query.radius * query.radius / (2.0 * k as f64)).exp();
    let rhs = within as f64 + c * weight * unconstrained as f64;
    Ok(Lemma1Report {
        lhs,
        uen_within: within,
        uen_unconstrained: unconstrained,
        c,
        weight,
        rhs,
        holds: lhs.value <= rhs,
        caveat: "UEN terms are random-search lower estimates of the true maxima".into(),
    })
}
