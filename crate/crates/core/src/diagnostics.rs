//! The vicinity-effect quantity `Omega_nu`, the `eta` decomposition, bound
//! right-hand sides and the bound-coverage experiment.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{covering_number, uen_estimate, CoverMethod, DifferenceClass, UenMode, UenQuery, MAX_EXACT_ROWS};
use crate::distribution::SyntheticDistribution;
use crate::error::{invalid, Result, VrmError};
use crate::function::{FunctionClass, Hypothesis, PointFunction};
use crate::learn::{check_sample_size, expected_risks, generalization_gap, vrm_train, MonteCarloBudget};
use crate::matching::vicinity_ghost_match;
use crate::rng::{derive_seed, rng_from_seed, trial_seed};
use crate::sample::{SampleSet, MAX_DIM};
use crate::stats::{combined_se, proportion, Estimate, Running};
use crate::vicinity::{sample_vicinal, VicinalDistribution, VicinityKind, VicinitySpec};

const STREAM_SAMPLE: u64 = 0x5a5a_0001;
const STREAM_PHI: u64 = 0x5a5a_0002;
const STREAM_TRAIN: u64 = 0x5a5a_0003;
const STREAM_ETA: u64 = 0x5a5a_0004;
const STREAM_EXPECTED: u64 = 0x5a5a_0005;
const STREAM_POOL: u64 = 0x5a5a_0006;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMethod {
    CoverForm,
    RiskForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: OmegaMethod,
    /// Cover radius `xi / 4` (cover form only).
    pub radius: Option<f64>,
    pub cover_size: usize,
    /// Base-class indices of the cover members `Lambda*`.
    pub members: Vec<usize>,
    /// Per-member estimates, aligned with `members`.
    pub per_member: Vec<Estimate>,
    /// Mean exact covering number `N(P, xi/4, l1(S+))` over trials (cover form only).
    pub mean_cover_size: Option<f64>,
}

impl OmegaEstimate {
    fn from_members(method: OmegaMethod, radius: Option<f64>, members: Vec<usize>, per_member: Vec<Estimate>) -> Self {
        let mut best = 0;
        for (i, e) in per_member.iter().enumerate() {
            if e.value > per_member[best].value {
                best = i;
            }
        }
        Self {
            value: per_member[best].value,
            std_error: per_member[best].std_error,
            method,
            radius,
            cover_size: members.len(),
            members,
            per_member,
            mean_cover_size: None,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.value, std_error: self.std_error }
    }
}

fn check_base(base: &[Hypothesis]) -> Result<()> {
    if base.is_empty() {
        return invalid("base class must be non-empty");
    }
    if base.len() > MAX_EXACT_ROWS {
        return Err(VrmError::Precondition(format!(
            "exact covers support at most {MAX_EXACT_ROWS} hypotheses, got {}",
            base.len()
        )));
    }
    Ok(())
}

struct CoverTrial {
    centers: Vec<usize>,
    row_means: Vec<f64>,
}

fn cover_trial(
    base: &[Hypothesis],
    spec: &VicinitySpec,
    dist: &SyntheticDistribution,
    n: usize,
    radius: f64,
    phi_draws: usize,
    ts: u64,
) -> Result<CoverTrial> {
    let mut rng = rng_from_seed(derive_seed(ts, STREAM_SAMPLE));
    let z = dist.sample_with(n, &mut rng)?;
    let zprime = dist.sample_with(n, &mut rng)?;
    let matching = vicinity_ghost_match(&z, &zprime)?;
    let dc = DifferenceClass::new(base.to_vec(), spec.clone(), phi_draws, derive_seed(ts, STREAM_PHI))?;
    let p = dc.evaluate(&z, &zprime, &matching)?;
    let cover = covering_number(&p, radius, CoverMethod::Exact)?;
    Ok(CoverTrial { centers: cover.centers, row_means: (0..p.rows()).map(|i| p.row_mean(i)).collect() })
}

/// Cover form of `Omega_nu`.
///
/// Each trial draws fresh `(Z, Z')`, matches them and builds the exact
/// `xi/4` cover of `P` on `S+`. `Lambda*` is the cover found most often
/// (earliest trial on ties); every member's mean of `p` over the pairs is
/// averaged across all trials and the maximum over `Lambda*` is returned.
pub fn omega_nu_cover_form(
    base: &[Hypothesis],
    spec: &VicinitySpec,
    dist: &SyntheticDistribution,
    n: usize,
    xi: f64,
    trials: usize,
    phi_draws: usize,
    seed: u64,
) -> Result<OmegaEstimate> {
    check_base(base)?;
    if trials < 2 {
        return invalid("need at least two trials");
    }
    let radius = xi / 4.0;
    let runs: Vec<CoverTrial> = (0..trials)
        .into_par_iter()
        .map(|t| cover_trial(base, spec, dist, n, radius, phi_draws, trial_seed(seed, t)))
        .collect::<Result<_>>()?;

    let mut counts: HashMap<&[usize], (usize, usize)> = HashMap::new();
    for (t, r) in runs.iter().enumerate() {
        counts.entry(&r.centers).or_insert((0, t)).0 += 1;
    }
    let (&modal, _) =
        counts.iter().max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1))).expect("at least one trial");
    let members = modal.to_vec();
    let per_member = members
        .iter()
        .map(|&i| {
            let mut acc = Running::default();
            for r in &runs {
                acc.push(r.row_means[i]);
            }
            acc.estimate()
        })
        .collect();
    let mut out = OmegaEstimate::from_members(OmegaMethod::CoverForm, Some(radius), members, per_member);
    out.mean_cover_size = Some(runs.iter().map(|r| r.centers.len() as f64).sum::<f64>() / trials as f64);
    Ok(out)
}

/// Risk form `max_{f in Lambda*} (R f - R phi(f, .))`, estimated from `m`
/// paired draws of `f(z) - phi(f, z)` with `z ~ P`. Mixup without its own pool
/// takes partners from a fresh sample of `pool_size` points containing `z`.
pub fn omega_nu_risk_form(
    base: &[Hypothesis],
    members: &[usize],
    spec: &VicinitySpec,
    dist: &SyntheticDistribution,
    pool_size: usize,
    m: usize,
    phi_draws: usize,
    seed: u64,
) -> Result<OmegaEstimate> {
    if members.is_empty() || members.iter().any(|&i| i >= base.len()) {
        return invalid("cover members must be non-empty valid indices");
    }
    if m < 2 || phi_draws == 0 || pool_size == 0 {
        return invalid("need m >= 2, phi_draws >= 1 and a non-empty pool");
    }
    let split = dist.validate()?;
    let fs: Vec<Hypothesis> = members.iter().map(|&i| base[i].clone()).collect();
    fs.iter().try_for_each(|h| h.validate(split))?;
    let needs_pool = matches!(spec.kind, VicinityKind::Mixup { pool: None, .. });
    let diffs: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let js = derive_seed(seed, j as u64);
            let mut rng = rng_from_seed(derive_seed(js, STREAM_SAMPLE));
            let pool = dist.sample_with(if needs_pool { pool_size } else { 1 }, &mut rng)?;
            let vic = spec.resolve(split, Some(&pool))?;
            let anchor = pool.row(0);
            let phis = vic.phi_all(&fs, anchor, phi_draws, derive_seed(js, STREAM_PHI));
            Ok(fs.iter().zip(&phis).map(|(f, p)| f.eval(anchor) - p.value).collect())
        })
        .collect::<Result<_>>()?;
    let per_member = (0..fs.len())
        .map(|i| {
            let mut acc = Running::default();
            for d in &diffs {
                acc.push(d[i]);
            }
            acc.estimate()
        })
        .collect();
    Ok(OmegaEstimate::from_members(OmegaMethod::RiskForm, None, members.to_vec(), per_member))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaTriple {
    pub eta: Estimate,
    pub eta1: Estimate,
    pub eta2: Estimate,
    pub tau: Option<f64>,
    /// `eta1 <= tau`, when a bound was supplied.
    pub within_tau: Option<bool>,
}

fn mean_over<F: PointFunction>(f: &F, points: &SampleSet) -> Estimate {
    let mut acc = Running::default();
    for r in points.rows() {
        acc.push(f.eval(r));
    }
    acc.estimate()
}

/// `eta1 = int f d[P - P_nu]`, `eta2 = int f d[E_a V - P_nu]` and
/// `eta = eta1 - eta2`, from three Monte Carlo means of `m` draws each: `A`
/// under `P`, `B` under `P_nu` built on `z`, `C` under the vicinal
/// distribution of a fresh anchor set of the same size.
pub fn eta_decomposition<F: PointFunction>(
    f: &F,
    dist: &SyntheticDistribution,
    z: &SampleSet,
    spec: &VicinitySpec,
    m: usize,
    tau: Option<f64>,
    seed: u64,
) -> Result<EtaTriple> {
    if m < 2 {
        return invalid("need at least two draws");
    }
    let split = dist.validate()?;
    z.check_compatible(&dist.sample(1, 0)?)?;
    let mut acc = Running::default();
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let mut buf = [0.0f64; MAX_DIM];
    for _ in 0..m {
        dist.draw_into(&mut rng, &mut buf[..split.dim()]);
        acc.push(f.eval(&buf[..split.dim()]));
    }
    let a = acc.estimate();
    let vd = VicinalDistribution::new(z.clone(), spec.clone())?;
    let b = mean_over(f, &sample_vicinal(&vd, m, derive_seed(seed, 1))?);
    let fresh = dist.sample(z.len(), derive_seed(seed, 2))?;
    let vd_fresh = VicinalDistribution::new(fresh, spec.clone())?;
    let c = mean_over(f, &sample_vicinal(&vd_fresh, m, derive_seed(seed, 3))?);

    let eta1 = Estimate { value: a.value - b.value, std_error: combined_se(a.std_error, b.std_error) };
    let eta2 = Estimate { value: c.value - b.value, std_error: combined_se(c.std_error, b.std_error) };
    let eta = Estimate { value: eta1.value - eta2.value, std_error: combined_se(a.std_error, c.std_error) };
    Ok(EtaTriple { eta, eta1, eta2, tau, within_tau: tau.map(|t| eta1.value <= t) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaNegativeReport {
    /// Fraction of trials with `eta < 0`, with its binomial standard error.
    pub probability: Estimate,
    pub mean_eta1: f64,
    /// Largest observed `eta1`, an empirical stand-in for `tau`.
    pub tau_hat: f64,
    pub rows: Vec<EtaTriple>,
}

impl EtaNegativeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,eta,eta_se,eta1,eta1_se,eta2,eta2_se\n");
        for (t, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{t},{},{},{},{},{},{}\n",
                r.eta.value, r.eta.std_error, r.eta1.value, r.eta1.std_error, r.eta2.value, r.eta2.std_error
            ));
        }
        out
    }
}

/// Per trial: fresh `Z`, `f_nu = vrm_train(class, Z)`, then
/// [`eta_decomposition`] with `budget.risk_draws` draws per mean.
pub fn prob_eta_negative(
    class: &FunctionClass,
    dist: &SyntheticDistribution,
    n: usize,
    spec: &VicinitySpec,
    trials: usize,
    budget: MonteCarloBudget,
    seed: u64,
) -> Result<EtaNegativeReport> {
    if trials < 100 {
        return Err(VrmError::Precondition(format!("trials = {trials} < 100")));
    }
    budget.validate()?;
    let rows: Vec<EtaTriple> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<EtaTriple> {
            let ts = trial_seed(seed, t);
            let z = dist.sample(n, derive_seed(ts, STREAM_SAMPLE))?;
            let trained = vrm_train(class, &z, spec, budget.phi_draws, derive_seed(ts, STREAM_TRAIN))?;
            eta_decomposition(&trained.hypothesis, dist, &z, spec, budget.risk_draws, None, derive_seed(ts, STREAM_ETA))
        })
        .collect::<Result<_>>()?;
    let negatives = rows.iter().filter(|r| r.eta.value < 0.0).count();
    Ok(EtaNegativeReport {
        probability: proportion(negatives, trials),
        mean_eta1: rows.iter().map(|r| r.eta1.value).sum::<f64>() / trials as f64,
        tau_hat: rows.iter().map(|r| r.eta1.value).fold(f64::NEG_INFINITY, f64::max),
        rows,
    })
}

/// `exp(-2 (xi - sum E x_n)^2 / sum (b_n - a_n)^2)`, clamped to `[0, 1]`;
/// 1 when `xi <= sum E x_n`, where the exponential form is not a bound.
pub fn hoeffding_one_sided(xi: f64, means: &[f64], ranges: &[(f64, f64)]) -> Result<f64> {
    if means.len() != ranges.len() || means.is_empty() {
        return Err(VrmError::SizeMismatch { left: means.len(), right: ranges.len() });
    }
    if ranges.iter().any(|(a, b)| !(a < b && a.is_finite() && b.is_finite())) {
        return invalid("every range needs a < b");
    }
    if !xi.is_finite() || means.iter().any(|m| !m.is_finite()) {
        return invalid("xi and means must be finite");
    }
    let shift = xi - means.iter().sum::<f64>();
    if shift <= 0.0 {
        return Ok(1.0);
    }
    let spread: f64 = ranges.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    Ok((-2.0 * shift * shift / spread).exp().clamp(0.0, 1.0))
}

/// Power of `(b - a)` under the square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeExponent {
    /// `32 (b - a)`.
    Linear,
    /// `32 (b - a)^2`.
    Squared,
}

/// `4 omega + sqrt(32 (b-a)^e (log covering - log(t/2)) / N)`, with the
/// square-root argument floored at zero.
pub fn bound_rhs(omega: f64, covering: f64, n: usize, t: f64, a: f64, b: f64, exponent: RangeExponent) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(format!("confidence t = {t} must lie in (0, 1)"));
    }
    if n == 0 {
        return invalid("N must be at least 1");
    }
    if !(a < b && a.is_finite() && b.is_finite()) {
        return invalid("range needs finite a < b");
    }
    if !(covering > 0.0 && covering.is_finite()) || !omega.is_finite() {
        return invalid("covering term must be positive and omega finite");
    }
    let width = match exponent {
        RangeExponent::Linear => b - a,
        RangeExponent::Squared => (b - a) * (b - a),
    };
    let arg = 32.0 * width * (covering.ln() - (t / 2.0).ln()) / n as f64;
    Ok(4.0 * omega + arg.max(0.0).sqrt())
}

/// Bound with the expected covering number of `P` at `xi/4` and `(b - a)`
/// under the root.
pub fn theorem3_rhs(omega: f64, expected_covering: f64, n: usize, t: f64, a: f64, b: f64) -> Result<f64> {
    bound_rhs(omega, expected_covering, n, t, a, b, RangeExponent::Linear)
}

/// Bound with `(b - a)^2` under the root and covering term
/// `uen_within + c exp(-N r^2 / 2K) uen_unconstrained`.
pub fn corollary1_rhs(
    omega: f64,
    uen_within: f64,
    uen_unconstrained: f64,
    n: usize,
    t: f64,
    a: f64,
    b: f64,
    r: f64,
    k: usize,
    c: f64,
) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return invalid("constant c must be positive");
    }
    if k == 0 || !r.is_finite() {
        return invalid("K must be positive and r finite");
    }
    let covering = crate::covering::lemma1_rhs(uen_within, uen_unconstrained, n, r, k, c);
    bound_rhs(omega, covering, n, t, a, b, RangeExponent::Squared)
}

/// Inputs shared by the bound routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    pub n: usize,
    pub t: f64,
    pub xi: f64,
    /// Ball radius of the within-cover UEN term.
    pub r: f64,
    /// Constant `c` of the UEN covering term.
    pub c: f64,
    /// Trials for the cover-form `Omega`.
    pub omega_trials: usize,
    /// UEN search budget; zero skips the UEN bound.
    pub uen_budget: usize,
    pub budget: MonteCarloBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub settings: BoundSettings,
    pub a: f64,
    pub b: f64,
    pub gap: f64,
    pub omega: Estimate,
    pub expected_covering: f64,
    /// `(b - a)` under the root.
    pub theorem3_rhs: f64,
    /// `(b - a)^2` under the root, UEN covering term.
    pub corollary1_rhs: Option<f64>,
    pub uen_within: Option<usize>,
    pub uen_unconstrained: Option<usize>,
    /// `gap > theorem3_rhs`.
    pub violated: bool,
}

/// Gap on one sample against both bounds, with `Omega` and the expected
/// covering number estimated by the cover form.
pub fn bound_report(
    class: &FunctionClass,
    dist: &SyntheticDistribution,
    spec: &VicinitySpec,
    settings: BoundSettings,
    seed: u64,
) -> Result<BoundReport> {
    let base = class.require_finite()?;
    let split = dist.validate()?;
    class.validate(split)?;
    let (a, b) = class.bound_range();
    check_sample_size(settings.n, class.range_width(), settings.xi)?;
    let z = dist.sample(settings.n, derive_seed(seed, STREAM_SAMPLE))?;
    let gap = generalization_gap(class, &z, spec, dist, settings.budget, derive_seed(seed, STREAM_EXPECTED))?.gap;
    let omega = omega_nu_cover_form(
        base,
        spec,
        dist,
        settings.n,
        settings.xi,
        settings.omega_trials,
        settings.budget.phi_draws,
        derive_seed(seed, STREAM_PHI),
    )?;
    let expected_covering = omega.mean_cover_size.unwrap_or(1.0);
    let theorem3 = theorem3_rhs(omega.value, expected_covering, settings.n, settings.t, a, b)?;
    let (corollary1, uen_within, uen_unconstrained) = if settings.uen_budget > 0 {
        let dc = DifferenceClass::new(
            base.to_vec(),
            spec.clone(),
            settings.budget.phi_draws,
            derive_seed(seed, STREAM_POOL),
        )?;
        let q = UenQuery {
            xi: settings.xi,
            n: settings.n,
            radius: settings.r,
            budget: settings.uen_budget,
            seed: derive_seed(seed, STREAM_TRAIN),
        };
        let w = uen_estimate(&dc, dist, q, UenMode::WithinCover)?.value;
        let u = uen_estimate(&dc, dist, q, UenMode::Unconstrained)?.value;
        let rhs = corollary1_rhs(
            omega.value,
            w as f64,
            u as f64,
            settings.n,
            settings.t,
            a,
            b,
            settings.r,
            split.dim(),
            settings.c,
        )?;
        (Some(rhs), Some(w), Some(u))
    } else {
        (None, None, None)
    };
    Ok(BoundReport {
        settings,
        a,
        b,
        gap,
        omega: omega.estimate(),
        expected_covering,
        theorem3_rhs: theorem3,
        corollary1_rhs: corollary1,
        uen_within,
        uen_unconstrained,
        violated: gap > theorem3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub trial: usize,
    pub gap: f64,
    pub omega: f64,
    pub covering: usize,
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    pub t: f64,
    pub xi: f64,
    pub trials: usize,
    pub exponent: RangeExponent,
    pub violation_frequency: Estimate,
    /// `violation_frequency <= t + 3` binomial standard errors.
    pub within_tolerance: bool,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,gap,omega,covering,rhs,violated\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.trial,
                r.gap,
                r.omega,
                r.covering,
                r.rhs,
                u8::from(r.violated)
            ));
        }
        out
    }
}

/// Per trial: fresh `Z` and `Z'`, the gap `sup_f (R f - R_nu f)` and the
/// covering-number bound with that trial's exact `xi/4` covering number
/// of `P` and its cover-form `Omega`. Expected risks are estimated once.
pub fn bound_coverage_experiment(
    class: &FunctionClass,
    dist: &SyntheticDistribution,
    spec: &VicinitySpec,
    n: usize,
    t: f64,
    xi: f64,
    trials: usize,
    budget: MonteCarloBudget,
    seed: u64,
) -> Result<CoverageReport> {
    if trials < 100 {
        return Err(VrmError::Precondition(format!("trials = {trials} < 100")));
    }
    budget.validate()?;
    let base = class.require_finite()?;
    check_base(base)?;
    let split = dist.validate()?;
    class.validate(split)?;
    check_sample_size(n, class.range_width(), xi)?;
    let (a, b) = class.bound_range();
    bound_rhs(0.0, 1.0, n, t, a, b, RangeExponent::Linear)?;
    let expected = expected_risks(base, dist, budget.risk_draws, derive_seed(seed, STREAM_EXPECTED))?;
    let rows: Vec<CoverageRow> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<CoverageRow> {
            let ts = trial_seed(seed, trial);
            let mut rng = rng_from_seed(derive_seed(ts, STREAM_SAMPLE));
            let z = dist.sample_with(n, &mut rng)?;
            let zprime = dist.sample_with(n, &mut rng)?;
            let dc = DifferenceClass::new(base.to_vec(), spec.clone(), budget.phi_draws, derive_seed(ts, STREAM_PHI))?;
            let phis = dc.phi_table(&z)?;
            let gap = (0..base.len())
                .map(|i| expected[i].value - phis.iter().map(|row| row[i].value).sum::<f64>() / n as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            let matching = vicinity_ghost_match(&z, &zprime)?;
            let p = dc.evaluate(&z, &zprime, &matching)?;
            let cover = covering_number(&p, xi / 4.0, CoverMethod::Exact)?;
            let omega = cover.centers.iter().map(|&i| p.row_mean(i)).fold(f64::NEG_INFINITY, f64::max);
            let rhs = theorem3_rhs(omega, cover.size as f64, n, t, a, b)?;
            Ok(CoverageRow { trial, gap, omega, covering: cover.size, rhs, violated: gap > rhs })
        })
        .collect::<Result<_>>()?;
    let freq = proportion(rows.iter().filter(|r| r.violated).count(), trials);
    Ok(CoverageReport {
        n,
        t,
        xi,
        trials,
        exponent: RangeExponent::Linear,
        within_tolerance: freq.value <= t + 3.0 * freq.std_error,
        violation_frequency: freq,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossSpec;

    #[test]
    fn hoeffding_examples() {
        let ranges = [(0.0, 1.0); 4];
        let zero = hoeffding_one_sided(1.0, &[0.0; 4], &ranges).unwrap();
        assert!((zero - (-2.0f64 / 4.0).exp()).abs() < 1e-15);
        assert_eq!(hoeffding_one_sided(2.0, &[0.5; 4], &ranges).unwrap(), 1.0);
        assert_eq!(hoeffding_one_sided(1.0, &[0.5; 4], &ranges).unwrap(), 1.0);
        assert!(hoeffding_one_sided(1.0, &[0.0], &[(1.0, 1.0)]).is_err());
        assert!(hoeffding_one_sided(1.0, &[0.0, 0.0], &[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn rhs_examples() {
        let t = 0.1;
        assert_eq!(theorem3_rhs(0.0, t / 2.0, 100, t, 0.0, 1.0).unwrap(), 0.0);
        let base = theorem3_rhs(-0.02, 8.0, 512, 0.1, 0.0, 1.0).unwrap();
        let expected = 4.0 * -0.02 + (32.0 * (8f64.ln() - 0.05f64.ln()) / 512.0).sqrt();
        assert!((base - expected).abs() < 1e-15);
        assert!(theorem3_rhs(-0.02, 9.0, 512, 0.1, 0.0, 1.0).unwrap() > base);
        assert!(theorem3_rhs(-0.02, 8.0, 1024, 0.1, 0.0, 1.0).unwrap() < base);
        assert!(theorem3_rhs(0.0, 8.0, 512, 1.0, 0.0, 1.0).is_err());
        assert!(theorem3_rhs(0.0, 8.0, 0, 0.5, 0.0, 1.0).is_err());
        // (b - a) = 2 separates the two exponents.
        let lin = bound_rhs(0.0, 8.0, 512, 0.1, 0.0, 2.0, RangeExponent::Linear).unwrap();
        let sq = bound_rhs(0.0, 8.0, 512, 0.1, 0.0, 2.0, RangeExponent::Squared).unwrap();
        assert!((sq / lin - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn corollary_limit() {
        let far = corollary1_rhs(-0.1, 3.0, 10.0, 10_000_000, 0.1, 0.0, 1.0, 0.5, 2, 2.0).unwrap();
        assert!((far - -0.4).abs() < 0.01);
        assert!(corollary1_rhs(0.0, 3.0, 10.0, 100, 0.1, 0.0, 1.0, 0.5, 2, 0.0).is_err());
    }

    #[test]
    fn constant_class_omega_and_eta() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        let base = vec![Hypothesis::constant(0.4)];
        let spec = VicinitySpec::gaussian(0.2);
        let o = omega_nu_cover_form(&base, &spec, &d, 10, 0.4, 5, 8, 1).unwrap();
        assert_eq!((o.value, o.members.clone()), (0.0, vec![0]));
        let r = omega_nu_risk_form(&base, &[0], &spec, &d, 10, 50, 8, 1).unwrap();
        assert_eq!(r.value, 0.0);
        let z = d.sample(10, 2).unwrap();
        let e = eta_decomposition(&Hypothesis::constant(0.4), &d, &z, &spec, 500, Some(0.1), 3).unwrap();
        assert_eq!((e.eta.value, e.eta1.value, e.eta2.value), (0.0, 0.0, 0.0));
        assert_eq!(e.within_tau, Some(true));
    }

    #[test]
    fn eta_identity_is_exact() {
        let d = SyntheticDistribution::linear_regression(vec![1.0, -0.5], 0.1);
        let z = d.sample(20, 1).unwrap();
        let h = Hypothesis::linear(vec![0.8, -0.4], LossSpec::squared(4.0));
        let e = eta_decomposition(&h, &d, &z, &VicinitySpec::gaussian(0.1), 2000, None, 7).unwrap();
        assert_eq!(e.eta.value, e.eta1.value - e.eta2.value);
    }

    #[test]
    fn trial_preconditions() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        let class = FunctionClass::finite(vec![Hypothesis::constant(0.5)]);
        let budget = MonteCarloBudget { phi_draws: 4, risk_draws: 1000 };
        let spec = VicinitySpec::dirac();
        assert!(prob_eta_negative(&class, &d, 10, &spec, 0, budget, 1).is_err());
        assert!(bound_coverage_experiment(&class, &d, &spec, 200, 0.1, 0.2, 99, budget, 1).is_err());
    }

    #[test]
    fn singleton_constant_coverage() {
        let d = SyntheticDistribution::uniform_cube(1, 1);
        let class = FunctionClass::finite(vec![Hypothesis::constant(0.5)]);
        let budget = MonteCarloBudget { phi_draws: 4, risk_draws: 1000 };
        let r = bound_coverage_experiment(&class, &d, &VicinitySpec::dirac(), 200, 0.1, 0.5, 100, budget, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.gap == 0.0 && !row.violated));
        assert!(r.within_tolerance);
    }
}
