//! Risks, ERM and VRM training, the generalization gap and the
//! symmetrization experiment.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SyntheticDistribution;
use crate::error::{invalid, Result, VrmError};
use crate::function::{FunctionClass, Hypothesis, PointFunction};
use crate::loss::{LossKind, LossSpec};
use crate::rng::{derive_seed, rng_from_seed, trial_seed};
use crate::sample::{SampleSet, Split, MAX_DIM};
use crate::stats::{combined_se, proportion, Estimate};
use crate::vicinity::{VicinitySpec, DEFAULT_DRAWS};

/// Smallest Monte Carlo budget accepted for an expected risk.
pub const MIN_RISK_DRAWS: usize = 1000;
/// Gradient-descent step is `STEP_FRACTION / L`.
pub const STEP_FRACTION: f64 = 0.05;
pub const MAX_ITERATIONS: usize = 2000;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

const STREAM_EXPECTED: u64 = 0x4558_5045;
const STREAM_VICINAL: u64 = 0x5649_4349;
const STREAM_SAMPLE: u64 = 0x5341_4d50;

/// Monte Carlo sizes shared by the risk-based routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloBudget {
    /// Draws per anchor when estimating `phi(f, z_n)`.
    pub phi_draws: usize,
    /// Draws from the data distribution for an expected risk.
    pub risk_draws: usize,
}

impl Default for MonteCarloBudget {
    fn default() -> Self {
        Self { phi_draws: DEFAULT_DRAWS, risk_draws: 20_000 }
    }
}

impl MonteCarloBudget {
    pub fn validate(&self) -> Result<()> {
        if self.phi_draws == 0 {
            return invalid("phi_draws must be at least 1");
        }
        if self.risk_draws < MIN_RISK_DRAWS {
            return Err(VrmError::Precondition(format!("risk_draws = {} < {MIN_RISK_DRAWS}", self.risk_draws)));
        }
        Ok(())
    }
}

/// `(1/N) sum_n f(z_n)`.
pub fn empirical_risk<F: PointFunction>(f: &F, z: &SampleSet) -> f64 {
    let mut sum = 0.0;
    for row in z.rows() {
        sum += f.eval(row);
    }
    sum / z.len() as f64
}

/// Monte Carlo estimates of `R f = E_P f(z)` for every `f`, all from the same
/// `m` draws.
pub fn expected_risks<F: PointFunction>(
    fs: &[F],
    dist: &SyntheticDistribution,
    m: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if m < MIN_RISK_DRAWS {
        return Err(VrmError::Precondition(format!("m = {m} < {MIN_RISK_DRAWS}")));
    }
    let k = dist.validate()?.dim();
    let mut rng = rng_from_seed(seed);
    let mut buf = [0.0f64; MAX_DIM];
    let mut mean = vec![0.0f64; fs.len()];
    let mut m2 = vec![0.0f64; fs.len()];
    for t in 0..m {
        dist.draw_into(&mut rng, &mut buf[..k]);
        let count = (t + 1) as f64;
        for (i, f) in fs.iter().enumerate() {
            let v = f.eval(&buf[..k]);
            let delta = v - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (v - mean[i]);
        }
    }
    Ok(mean
        .into_iter()
        .zip(m2)
        .map(|(value, s)| Estimate { value, std_error: (s / (m - 1) as f64 / m as f64).sqrt() })
        .collect())
}

pub fn expected_risk<F: PointFunction>(f: &F, dist: &SyntheticDistribution, m: usize, seed: u64) -> Result<Estimate> {
    Ok(expected_risks(std::slice::from_ref(f), dist, m, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainWarning {
    /// The normal equations were singular; gradient descent was used instead.
    SingularNormalEquations,
    /// Gradient descent hit the iteration cap; the best iterate is returned.
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub risk: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub hypothesis: Hypothesis,
    /// Position in the list for finite classes.
    pub index: Option<usize>,
    /// Training objective at the returned hypothesis.
    pub objective: f64,
    pub warnings: Vec<TrainWarning>,
    pub trace: Vec<TraceRow>,
}

impl TrainResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,risk,grad_norm\n");
        for r in &self.trace {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.risk, r.grad_norm));
        }
        out
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

fn pick(members: &[Hypothesis], values: impl Iterator<Item = f64>) -> TrainResult {
    let (index, objective) = argmin(values);
    TrainResult {
        hypothesis: members[index].clone(),
        index: Some(index),
        objective,
        warnings: Vec::new(),
        trace: Vec::new(),
    }
}

/// Parameter layout of a [`FunctionClass::LinearFamily`].
#[derive(Debug, Clone, Copy)]
struct LinearLayout {
    split: Split,
    fit_bias: bool,
    bound: f64,
    loss: LossSpec,
}

impl LinearLayout {
    fn of(class: &FunctionClass, split: Split) -> Result<Self> {
        class.validate(split)?;
        match class {
            FunctionClass::LinearFamily { weight_bound, fit_bias, loss, .. } => {
                if loss.kind != LossKind::Squared {
                    return Err(VrmError::Precondition("linear-family training requires squared loss".into()));
                }
                Ok(Self { split, fit_bias: *fit_bias, bound: *weight_bound, loss: *loss })
            }
            FunctionClass::FiniteList { .. } => unreachable!("caller dispatches finite lists"),
        }
    }

    /// Rows of the `P x J` parameter matrix: `I` weights plus an optional bias.
    fn features(&self) -> usize {
        self.split.input_dim + usize::from(self.fit_bias)
    }

    fn project(&self, theta: &mut DMatrix<f64>) {
        for i in 0..self.split.input_dim {
            for j in 0..self.split.output_dim {
                theta[(i, j)] = theta[(i, j)].clamp(-self.bound, self.bound);
            }
        }
    }

    fn hypothesis(&self, theta: &DMatrix<f64>) -> Hypothesis {
        let (i_dim, j_dim) = (self.split.input_dim, self.split.output_dim);
        let weights = (0..j_dim).flat_map(|j| (0..i_dim).map(move |i| theta[(i, j)])).collect();
        let bias = (0..j_dim).map(|j| if self.fit_bias { theta[(i_dim, j)] } else { 0.0 }).collect();
        Hypothesis::Linear { weights, bias, loss: self.loss }
    }

    fn theta(&self, params: &[f64]) -> Result<DMatrix<f64>> {
        let (i_dim, j_dim) = (self.split.input_dim, self.split.output_dim);
        let expected = j_dim * self.features();
        if params.len() != expected {
            return Err(VrmError::DimensionMismatch { expected, found: params.len() });
        }
        let mut theta = DMatrix::zeros(self.features(), j_dim);
        for j in 0..j_dim {
            for i in 0..i_dim {
                theta[(i, j)] = params[j * i_dim + i];
            }
            if self.fit_bias {
                theta[(i_dim, j)] = params[j_dim * i_dim + j];
            }
        }
        Ok(theta)
    }

    fn params(&self, theta: &DMatrix<f64>) -> Vec<f64> {
        let (i_dim, j_dim) = (self.split.input_dim, self.split.output_dim);
        let mut out: Vec<f64> = (0..j_dim).flat_map(|j| (0..i_dim).map(move |i| theta[(i, j)])).collect();
        if self.fit_bias {
            out.extend((0..j_dim).map(|j| theta[(i_dim, j)]));
        }
        out
    }
}

/// Second moments of the (augmented) points a quadratic objective averages over:
/// `value(theta) = tr(theta' S theta) - 2 tr(theta' C) + q`.
#[derive(Debug, Clone)]
struct Moments {
    s: DMatrix<f64>,
    c: DMatrix<f64>,
    q: f64,
    count: f64,
}

impl Moments {
    fn new(p: usize, j: usize) -> Self {
        Self { s: DMatrix::zeros(p, p), c: DMatrix::zeros(p, j), q: 0.0, count: 0.0 }
    }

    fn add(&mut self, layout: &LinearLayout, z: &[f64]) {
        let i_dim = layout.split.input_dim;
        let p = layout.features();
        let mut xa = [1.0f64; MAX_DIM + 1];
        xa[..i_dim].copy_from_slice(&z[..i_dim]);
        let y = &z[i_dim..];
        for a in 0..p {
            for b in 0..p {
                self.s[(a, b)] += xa[a] * xa[b];
            }
            for (j, yj) in y.iter().enumerate() {
                self.c[(a, j)] += xa[a] * yj;
            }
        }
        self.q += y.iter().map(|v| v * v).sum::<f64>();
        self.count += 1.0;
    }

    fn finish(mut self) -> Self {
        self.s /= self.count;
        self.c /= self.count;
        self.q /= self.count;
        self
    }

    fn value(&self, theta: &DMatrix<f64>) -> f64 {
        let st = &self.s * theta;
        theta.component_mul(&st).sum() - 2.0 * theta.component_mul(&self.c).sum() + self.q
    }

    fn gradient(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        (&self.s * theta - &self.c) * 2.0
    }
}

/// The Monte Carlo vicinal risk of a linear family under squared loss, with
/// the draws frozen: anchor `n` uses the stream `derive_seed(seed, n)`, the
/// same draws [`crate::vicinity::Vicinity::vicinal_risks`] uses.
#[derive(Debug, Clone)]
pub struct VicinalObjective {
    layout: LinearLayout,
    moments: Moments,
    anchors: SampleSet,
    spec: VicinitySpec,
    m: usize,
    seed: u64,
}

impl VicinalObjective {
    pub fn new(class: &FunctionClass, z: &SampleSet, spec: &VicinitySpec, m: usize, seed: u64) -> Result<Self> {
        let layout = LinearLayout::of(class, z.split())?;
        if m == 0 {
            return invalid("number of draws must be at least 1");
        }
        let mut moments = Moments::new(layout.features(), layout.split.output_dim);
        let vic = spec.resolve(z.split(), Some(z))?;
        let k = z.dim();
        let mut buf = [0.0f64; MAX_DIM];
        for (n, anchor) in z.rows().enumerate() {
            if vic.is_dirac() {
                moments.add(&layout, anchor);
                continue;
            }
            let mut rng = rng_from_seed(derive_seed(seed, n as u64));
            for _ in 0..m {
                vic.perturb(anchor, &mut rng, &mut buf[..k]);
                moments.add(&layout, &buf[..k]);
            }
        }
        Ok(Self { layout, moments: moments.finish(), anchors: z.clone(), spec: spec.clone(), m, seed })
    }

    /// Number of free parameters: `J * I` weights, then `J` biases if fitted.
    pub fn num_params(&self) -> usize {
        self.layout.features() * self.layout.split.output_dim
    }

    /// Objective from the stored moments.
    pub fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.moments.value(&self.layout.theta(params)?))
    }

    pub fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        let theta = self.layout.theta(params)?;
        Ok(self.layout.params(&self.moments.gradient(&theta)))
    }

    /// Objective recomputed by replaying every draw through the unclipped loss.
    pub fn value_direct(&self, params: &[f64]) -> Result<f64> {
        let h = self.layout.hypothesis(&self.layout.theta(params)?);
        let vic = self.spec.resolve(self.anchors.split(), Some(&self.anchors))?;
        let k = self.anchors.dim();
        let mut buf = [0.0f64; MAX_DIM];
        let mut sum = 0.0;
        let mut count = 0usize;
        for (n, anchor) in self.anchors.rows().enumerate() {
            if vic.is_dirac() {
                sum += h.raw(anchor);
                count += 1;
                continue;
            }
            let mut rng = rng_from_seed(derive_seed(self.seed, n as u64));
            for _ in 0..self.m {
                vic.perturb(anchor, &mut rng, &mut buf[..k]);
                sum += h.raw(&buf[..k]);
                count += 1;
            }
        }
        Ok(sum / count as f64)
    }
}

/// Closed-form minimizer of a quadratic with moments `mo`, projected to the
/// weight box. `None` when `S` is numerically singular.
fn closed_form(layout: &LinearLayout, mo: &Moments) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(mo.s.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return None;
    }
    let mut theta = mo.s.clone().cholesky()?.solve(&mo.c);
    layout.project(&mut theta);
    Some(theta)
}

/// Projected gradient descent with step `STEP_FRACTION / L`, `L` the largest
/// Hessian eigenvalue, stopping when the gradient-mapping norm drops below
/// `GRADIENT_TOLERANCE`.
fn descend(layout: &LinearLayout, mo: &Moments) -> (DMatrix<f64>, f64, Vec<TraceRow>, bool) {
    let p = layout.features();
    let j = layout.split.output_dim;
    let lipschitz = 2.0 * SymmetricEigen::new(mo.s.clone()).eigenvalues.max();
    let mut theta = DMatrix::zeros(p, j);
    let mut trace = Vec::new();
    if !(lipschitz > 0.0) {
        let risk = mo.value(&theta);
        trace.push(TraceRow { iteration: 0, risk, grad_norm: 0.0 });
        return (theta, risk, trace, true);
    }
    let step = STEP_FRACTION / lipschitz;
    let mut best = (theta.clone(), f64::INFINITY);
    for iteration in 0..=MAX_ITERATIONS {
        let risk = mo.value(&theta);
        if risk < best.1 {
            best = (theta.clone(), risk);
        }
        let mut next = &theta - mo.gradient(&theta) * step;
        layout.project(&mut next);
        let grad_norm = (&theta - &next).norm() / step;
        trace.push(TraceRow { iteration, risk, grad_norm });
        if grad_norm < GRADIENT_TOLERANCE {
            return (theta, risk, trace, true);
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        theta = next;
    }
    (best.0, best.1, trace, false)
}

fn fit_linear(layout: &LinearLayout, mo: &Moments, prefer_closed_form: bool) -> TrainResult {
    let mut warnings = Vec::new();
    if prefer_closed_form {
        if let Some(theta) = closed_form(layout, mo) {
            let objective = mo.value(&theta);
            return TrainResult {
                hypothesis: layout.hypothesis(&theta),
                index: None,
                objective,
                warnings,
                trace: vec![TraceRow { iteration: 0, risk: objective, grad_norm: 0.0 }],
            };
        }
        warnings.push(TrainWarning::SingularNormalEquations);
    }
    let (theta, objective, trace, converged) = descend(layout, mo);
    if !converged {
        warnings.push(TrainWarning::NotConverged);
    }
    TrainResult { hypothesis: layout.hypothesis(&theta), index: None, objective, warnings, trace }
}

/// Empirical risk minimization. Finite lists return the exact argmin (ties go
/// to the lowest index); linear families with squared loss use least squares
/// on the unclipped loss, projected to the weight box.
pub fn erm_train(class: &FunctionClass, z: &SampleSet) -> Result<TrainResult> {
    class.validate(z.split())?;
    if let Some(members) = class.members() {
        return Ok(pick(members, members.iter().map(|h| empirical_risk(h, z))));
    }
    let layout = LinearLayout::of(class, z.split())?;
    let mut mo = Moments::new(layout.features(), layout.split.output_dim);
    for row in z.rows() {
        mo.add(&layout, row);
    }
    Ok(fit_linear(&layout, &mo.finish(), true))
}

/// Vicinal risk minimization with `m` draws per anchor.
///
/// Finite lists compare every member on the same draws. Linear families
/// minimize the frozen Monte Carlo objective by projected gradient descent.
pub fn vrm_train(
    class: &FunctionClass,
    z: &SampleSet,
    spec: &VicinitySpec,
    m: usize,
    seed: u64,
) -> Result<TrainResult> {
    class.validate(z.split())?;
    if m == 0 {
        return invalid("number of draws must be at least 1");
    }
    if let Some(members) = class.members() {
        let vic = spec.resolve(z.split(), Some(z))?;
        let risks = vic.vicinal_risks(members, z, m, seed);
        return Ok(pick(members, risks.iter().map(|e| e.value)));
    }
    let objective = VicinalObjective::new(class, z, spec, m, seed)?;
    Ok(fit_linear(&objective.layout, &objective.moments, false))
}

/// `sup_f {R f - R_nu f}` over a finite class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: f64,
    /// Member attaining the maximum.
    pub argmax: usize,
    pub expected: Vec<Estimate>,
    pub vicinal: Vec<Estimate>,
}

impl GapReport {
    fn from_parts(expected: Vec<Estimate>, vicinal: Vec<Estimate>) -> Self {
        let (argmax, neg) = argmin(expected.iter().zip(&vicinal).map(|(e, v)| -(e.value - v.value)));
        Self { gap: -neg, argmax, expected, vicinal }
    }

    /// `R f_i - R_nu f_i`.
    pub fn deviation(&self, i: usize) -> f64 {
        self.expected[i].value - self.vicinal[i].value
    }
}

/// Estimated generalization gap of a finite class on the sample `z`.
pub fn generalization_gap(
    class: &FunctionClass,
    z: &SampleSet,
    spec: &VicinitySpec,
    dist: &SyntheticDistribution,
    budget: MonteCarloBudget,
    seed: u64,
) -> Result<GapReport> {
    budget.validate()?;
    let members = class.require_finite()?;
    class.validate(z.split())?;
    z.check_compatible(&dist.sample(1, 0)?)?;
    let expected = expected_risks(members, dist, budget.risk_draws, derive_seed(seed, STREAM_EXPECTED))?;
    let vic = spec.resolve(z.split(), Some(z))?;
    let vicinal = vic.vicinal_risks(members, z, budget.phi_draws, derive_seed(seed, STREAM_VICINAL));
    Ok(GapReport::from_parts(expected, vicinal))
}

/// `8 (b - a)^2 / xi^2`, the smallest sample size the symmetrization step allows.
pub fn min_sample_size(width: f64, xi: f64) -> f64 {
    8.0 * width * width / (xi * xi)
}

pub fn check_sample_size(n: usize, width: f64, xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi.is_finite()) {
        return invalid("xi must be positive");
    }
    let need = min_sample_size(width, xi);
    if (n as f64) < need {
        return Err(VrmError::Precondition(format!("N >= 8(b-a)^2/xi^2 violated: N = {n} < {need}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationReport {
    pub n: usize,
    pub xi: f64,
    pub trials: usize,
    /// `P{sup_f (R f - R_nu f) > xi}`.
    pub lhs: Estimate,
    /// `2 P{sup_f (R' f - R_nu f) > xi / 2}` with `R'` the empirical risk on a ghost sample.
    pub rhs: Estimate,
    /// `lhs <= rhs + 3` combined standard errors.
    pub holds: bool,
}

/// Monte Carlo check of the symmetrization inequality on a finite class.
/// Expected risks are estimated once; trial `t` draws `Z` and `Z'` from the
/// stream of `seed + t`.
pub fn symmetrization_check(
    class: &FunctionClass,
    dist: &SyntheticDistribution,
    n: usize,
    spec: &VicinitySpec,
    xi: f64,
    trials: usize,
    budget: MonteCarloBudget,
    seed: u64,
) -> Result<SymmetrizationReport> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    budget.validate()?;
    let members = class.require_finite()?;
    let split = dist.validate()?;
    class.validate(split)?;
    check_sample_size(n, class.range_width(), xi)?;
    spec.resolve(split, Some(&dist.sample(1, 0)?))?;
    let expected = expected_risks(members, dist, budget.risk_draws, derive_seed(seed, STREAM_EXPECTED))?;
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let ts = trial_seed(seed, t);
            let mut rng = rng_from_seed(derive_seed(ts, STREAM_SAMPLE));
            let z = dist.sample_with(n, &mut rng)?;
            let zprime = dist.sample_with(n, &mut rng)?;
            let vic = spec.resolve(split, Some(&z))?;
            let vicinal = vic.vicinal_risks(members, &z, budget.phi_draws, derive_seed(ts, STREAM_VICINAL));
            let mut lhs = f64::NEG_INFINITY;
            let mut rhs = f64::NEG_INFINITY;
            for (i, h) in members.iter().enumerate() {
                lhs = lhs.max(expected[i].value - vicinal[i].value);
                rhs = rhs.max(empirical_risk(h, &zprime) - vicinal[i].value);
            }
            Ok((lhs > xi, rhs > xi / 2.0))
        })
        .collect::<Result<_>>()?;
    let lhs = proportion(outcomes.iter().filter(|o| o.0).count(), trials);
    let half = proportion(outcomes.iter().filter(|o| o.1).count(), trials);
    let rhs = Estimate { value: 2.0 * half.value, std_error: 2.0 * half.std_error };
    let holds = lhs.value <= rhs.value + 3.0 * combined_se(lhs.std_error, rhs.std_error);
    Ok(SymmetrizationReport { n, xi, trials, lhs, rhs, holds })
}
