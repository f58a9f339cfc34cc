//! One function per experiment id. Each returns its summary, CSV tables and
//! the checks it ran; nothing here touches the filesystem.

use serde::Serialize;
use serde_json::{json, Value};
use vrm_core::cdfdist::{dkw_decay_experiment, max_pair_cdf_distance, EmpiricalCdf};
use vrm_core::covering::{
    covering_number, estimate_lipschitz_lambda, lemma1_bound_check, packing_lower_bound, uen_estimate,
    verify_covering_sandwich, CandidateKind, UenMode, UenQuery, UenResult,
};
use vrm_core::diagnostics::{
    bound_coverage_experiment, bound_report, omega_nu_cover_form, omega_nu_risk_form, prob_eta_negative, BoundSettings,
};
use vrm_core::learn::{empirical_risk, erm_train, generalization_gap, symmetrization_check, vrm_train};
use vrm_core::matching::match_cost_of;
use vrm_core::rng::derive_seed;
use vrm_core::{vicinity_ghost_match, CoverMethod, DifferenceClass, FunctionClass, SampleSet, VrmError};

use crate::config::{ExperimentId, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

/// Results of one experiment. `assertions` hold by construction and abort the
/// run when they fail; `findings` are empirical checks that are only reported.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub summary: Value,
    pub tables: Vec<(String, String)>,
    pub assertions: Vec<Check>,
    pub findings: Vec<Check>,
}

impl Artifacts {
    fn new(summary: Value) -> Self {
        Self { summary, ..Default::default() }
    }

    fn table(mut self, name: &str, csv: String) -> Self {
        self.tables.push((name.into(), csv));
        self
    }

    fn assert(mut self, c: Check) -> Self {
        self.assertions.push(c);
        self
    }

    fn finding(mut self, c: Check) -> Self {
        self.findings.push(c);
        self
    }
}

pub fn run(id: ExperimentId, cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let index = ExperimentId::SEQUENCE.iter().position(|e| *e == id).expect("runnable experiment");
    let seed = derive_seed(cfg.seed, index as u64 + 1);
    match id {
        ExperimentId::Gen => gen(cfg, seed),
        ExperimentId::Match => matching(cfg, seed),
        ExperimentId::Dkw => dkw(cfg, seed),
        ExperimentId::Train => train(cfg, seed),
        ExperimentId::Gap => gap(cfg, seed),
        ExperimentId::Covering => covering(cfg, seed),
        ExperimentId::Uen => uen(cfg, seed),
        ExperimentId::Omega => omega(cfg, seed),
        ExperimentId::Eta => eta(cfg, seed),
        ExperimentId::Bound => bound(cfg, seed),
        ExperimentId::Coverage => coverage(cfg, seed),
        ExperimentId::All => unreachable!("`all` is expanded by the caller"),
    }
}

fn members(cfg: &RunConfig) -> Result<Vec<vrm_core::Hypothesis>, CliError> {
    Ok(cfg.class.require_finite()?.to_vec())
}

fn sample_pair(cfg: &RunConfig, seed: u64) -> Result<(SampleSet, SampleSet), CliError> {
    Ok((cfg.distribution.sample(cfg.n, derive_seed(seed, 0))?, cfg.distribution.sample(cfg.n, derive_seed(seed, 1))?))
}

fn gen(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let z = cfg.distribution.sample(cfg.n, seed)?;
    let mean: Vec<f64> = (0..z.dim()).map(|k| z.rows().map(|r| r[k]).sum::<f64>() / z.len() as f64).collect();
    let summary = json!({
        "n": z.len(),
        "dim": z.dim(),
        "sample_mean": mean,
        "distribution_mean": cfg.distribution.mean()?,
    });
    Ok(Artifacts::new(summary)
        .assert(check("row count", z.len() == cfg.n, format!("{} rows", z.len())))
        .table("gen_sample.csv", z.to_csv()))
}

fn matching(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let (z, zp) = sample_pair(cfg, seed)?;
    let m = vicinity_ghost_match(&z, &zp)?;
    let identity: Vec<usize> = (0..z.len()).collect();
    let identity_cost = match_cost_of(&z, &zp, &identity)?;
    let statistic = max_pair_cdf_distance(&m, &EmpiricalCdf::new(&z), &z, &zp)?;
    let mut csv = String::from("n,ghost,distance\n");
    for (n, (&j, d)) in m.permutation.iter().zip(&m.pair_distances).enumerate() {
        csv.push_str(&format!("{n},{j},{d}\n"));
    }
    let slack = 1e-9 * identity_cost.max(1.0);
    Ok(Artifacts::new(json!({
        "n": z.len(),
        "total_cost": m.total_cost,
        "identity_cost": identity_cost,
        "max_pair_cdf_distance": statistic,
    }))
    .assert(check(
        "optimal cost <= identity cost",
        m.total_cost <= identity_cost + slack,
        format!("{} vs {}", m.total_cost, identity_cost),
    ))
    .table("match_pairs.csv", csv))
}

fn dkw(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let r = dkw_decay_experiment(&cfg.distribution, &cfg.n_grid, cfg.dkw_xi, cfg.trials, seed)?;
    let tolerance = 2.0 / (cfg.trials as f64).sqrt();
    let monotone = r.tails_nonincreasing(tolerance);
    let slope_ok = r.slope.is_none_or(|s| s <= 0.0);
    let csv = r.to_csv();
    let summary = json!({
        "xi": r.xi,
        "dim": r.dim,
        "slope": r.slope,
        "intercept": r.intercept,
        "fitted_constant": r.fitted_constant,
        "predicted_rate": r.predicted_rate,
    });
    Ok(Artifacts::new(summary)
        .finding(check("tails nonincreasing", monotone, format!("tolerance {tolerance}")))
        .finding(check("log-tail slope <= 0", slope_ok, format!("{:?}", r.slope)))
        .table("dkw.csv", csv))
}

fn train(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let class = cfg.train_class();
    let z = cfg.distribution.sample(cfg.n, derive_seed(seed, 0))?;
    let erm = erm_train(class, &z)?;
    let vrm = vrm_train(class, &z, &cfg.vicinity, cfg.budget.phi_draws, derive_seed(seed, 1))?;
    let mut a = Artifacts::new(json!({
        "erm": {
            "hypothesis": erm.hypothesis,
            "index": erm.index,
            "objective": erm.objective,
            "warnings": erm.warnings,
            "empirical_risk": empirical_risk(&erm.hypothesis, &z),
        },
        "vrm": {
            "hypothesis": vrm.hypothesis,
            "index": vrm.index,
            "objective": vrm.objective,
            "warnings": vrm.warnings,
            "empirical_risk": empirical_risk(&vrm.hypothesis, &z),
        },
    }))
    .table("train_erm_trace.csv", erm.trace_csv())
    .table("train_vrm_trace.csv", vrm.trace_csv());
    if cfg.vicinity.is_dirac() && matches!(class, FunctionClass::FiniteList { .. }) {
        a = a.assert(check(
            "dirac vrm picks the erm member",
            erm.index == vrm.index,
            format!("{:?} vs {:?}", erm.index, vrm.index),
        ));
    }
    Ok(a)
}

fn gap(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let z = cfg.distribution.sample(cfg.n, derive_seed(seed, 0))?;
    let g = generalization_gap(&cfg.class, &z, &cfg.vicinity, &cfg.distribution, cfg.budget, derive_seed(seed, 1))?;
    let sym = symmetrization_check(
        &cfg.class,
        &cfg.distribution,
        cfg.n,
        &cfg.vicinity,
        cfg.xi,
        cfg.trials,
        cfg.budget,
        derive_seed(seed, 2),
    )?;
    let mut csv = String::from("member,expected,expected_se,vicinal,vicinal_se,deviation\n");
    for (i, (e, v)) in g.expected.iter().zip(&g.vicinal).enumerate() {
        csv.push_str(&format!("{i},{},{},{},{},{}\n", e.value, e.std_error, v.value, v.std_error, g.deviation(i)));
    }
    let dominates = (0..g.expected.len()).all(|i| g.gap >= g.deviation(i));
    Ok(Artifacts::new(json!({ "gap": g.gap, "argmax": g.argmax, "symmetrization": sym }))
        .assert(check("gap is the maximum deviation", dominates, ""))
        .finding(check("symmetrization inequality", sym.holds, format!("lhs {} rhs {}", sym.lhs.value, sym.rhs.value)))
        .table("gap.csv", csv))
}

fn covering(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let (z, zp) = sample_pair(cfg, seed)?;
    let m = vicinity_ghost_match(&z, &zp)?;
    let dc = DifferenceClass::new(members(cfg)?, cfg.vicinity.clone(), cfg.budget.phi_draws, derive_seed(seed, 2))?;
    let p = dc.evaluate(&z, &zp, &m)?;
    let f = dc.base_matrix(&z)?;
    let exact = covering_number(&p, cfg.xi, CoverMethod::Exact)?;
    let greedy = covering_number(&p, cfg.xi, CoverMethod::Greedy)?;
    let packing = packing_lower_bound(&p, cfg.xi);
    let lambda = match estimate_lipschitz_lambda(&dc, &z) {
        Ok(l) => Some(l),
        Err(VrmError::Precondition(_) | VrmError::Degenerate(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let sandwich = lambda.map(|l| verify_covering_sandwich(&dc, &z, &zp, cfg.xi, l)).transpose()?;
    let mut a = Artifacts::new(json!({
        "exact": exact,
        "greedy": greedy,
        "packing_lower_bound": packing,
        "lambda_hat": lambda,
        "sandwich": sandwich,
    }))
    .assert(check("exact <= greedy", exact.size <= greedy.size, format!("{} vs {}", exact.size, greedy.size)))
    .assert(check("packing <= exact", packing <= exact.size, format!("{packing} vs {}", exact.size)))
    .assert(check("covers are valid", exact.is_cover_of(&p) && greedy.is_cover_of(&p), ""));
    if let Some(s) = &sandwich {
        a = a.finding(check(
            "sandwich upper inequality",
            s.upper_holds,
            format!("{} <= {}", s.covering_p, s.covering_f_upper),
        ));
        if let (Some(held), Some(c)) = (s.lower_holds, s.covering_f_lower) {
            a = a.finding(check("sandwich lower inequality", held, format!("{c} <= {}", s.covering_p)));
        }
    }
    Ok(a.table("covering_p_matrix.csv", p.to_csv()).table("covering_f_matrix.csv", f.to_csv()))
}

fn uen_rows(out: &mut String, r: &UenResult) {
    let mode = match r.mode {
        UenMode::Unconstrained => "unconstrained",
        UenMode::WithinCover => "within_cover",
    };
    for t in &r.trace {
        let kind = match t.kind {
            CandidateKind::Within => "within",
            CandidateKind::Free => "free",
        };
        out.push_str(&format!("{mode},{},{kind},{},{}\n", t.candidate, t.size, t.incumbent));
    }
}

fn uen(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let dc = DifferenceClass::new(members(cfg)?, cfg.vicinity.clone(), cfg.budget.phi_draws, derive_seed(seed, 0))?;
    let query = UenQuery { xi: cfg.xi, n: cfg.n, radius: cfg.r, budget: cfg.uen_budget, seed: derive_seed(seed, 1) };
    let within = uen_estimate(&dc, &cfg.distribution, query, UenMode::WithinCover)?;
    let free = uen_estimate(&dc, &cfg.distribution, query, UenMode::Unconstrained)?;
    let lemma = lemma1_bound_check(&dc, &cfg.distribution, query, cfg.trials, cfg.c)?;
    let mut csv = String::from("mode,candidate,kind,size,incumbent\n");
    uen_rows(&mut csv, &within);
    uen_rows(&mut csv, &free);
    Ok(Artifacts::new(json!({
        "uen_within": within.value,
        "uen_unconstrained": free.value,
        "lemma1": lemma,
    }))
    .assert(check("within <= unconstrained", within.value <= free.value, format!("{} vs {}", within.value, free.value)))
    .finding(check("expected covering within uen bound", lemma.holds, format!("{} <= {}", lemma.lhs.value, lemma.rhs)))
    .table("uen_trace.csv", csv))
}

fn omega(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let base = members(cfg)?;
    let cover = omega_nu_cover_form(
        &base,
        &cfg.vicinity,
        &cfg.distribution,
        cfg.n,
        cfg.xi,
        cfg.trials,
        cfg.budget.phi_draws,
        derive_seed(seed, 0),
    )?;
    let risk = omega_nu_risk_form(
        &base,
        &cover.members,
        &cfg.vicinity,
        &cfg.distribution,
        cfg.n,
        cfg.budget.risk_draws,
        cfg.budget.phi_draws,
        derive_seed(seed, 1),
    )?;
    let mut csv = String::from("member,cover_value,cover_se,risk_value,risk_se\n");
    for (k, &i) in cover.members.iter().enumerate() {
        let (c, r) = (cover.per_member[k], risk.per_member[k]);
        csv.push_str(&format!("{i},{},{},{},{}\n", c.value, c.std_error, r.value, r.std_error));
    }
    let agree = cover.estimate().agrees_with(&risk.estimate(), 3.0);
    Ok(Artifacts::new(json!({ "cover_form": cover, "risk_form": risk }))
        .finding(check("cover and risk forms agree within 3 SE", agree, format!("{} vs {}", cover.value, risk.value)))
        .table("omega.csv", csv))
}

fn eta(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let r =
        prob_eta_negative(cfg.train_class(), &cfg.distribution, cfg.n, &cfg.vicinity, cfg.trials, cfg.budget, seed)?;
    let identity = r.rows.iter().all(|e| e.eta.value.to_bits() == (e.eta1.value - e.eta2.value).to_bits());
    let below = r.rows.iter().filter(|e| e.eta1.value < -3.0 * e.eta1.std_error).count();
    Ok(Artifacts::new(json!({
        "probability": r.probability,
        "mean_eta1": r.mean_eta1,
        "tau_hat": r.tau_hat,
    }))
    .assert(check("eta = eta1 - eta2", identity, ""))
    .finding(check("eta1 >= -3 SE", below == 0, format!("{below} trials below")))
    .table("eta.csv", r.to_csv()))
}

fn bound(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let settings = BoundSettings {
        n: cfg.n,
        t: cfg.t,
        xi: cfg.xi,
        r: cfg.r,
        c: cfg.c,
        omega_trials: cfg.trials,
        uen_budget: cfg.uen_budget,
        budget: cfg.budget,
    };
    let r = bound_report(&cfg.class, &cfg.distribution, &cfg.vicinity, settings, seed)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let csv = format!(
        "gap,omega,omega_se,expected_covering,theorem3_rhs,corollary1_rhs,uen_within,uen_unconstrained,violated\n{},{},{},{},{},{},{},{},{}\n",
        r.gap,
        r.omega.value,
        r.omega.std_error,
        r.expected_covering,
        r.theorem3_rhs,
        opt(r.corollary1_rhs),
        opt(r.uen_within.map(|u| u as f64)),
        opt(r.uen_unconstrained.map(|u| u as f64)),
        u8::from(r.violated),
    );
    let finite = r.theorem3_rhs.is_finite() && r.corollary1_rhs.is_none_or(f64::is_finite);
    Ok(Artifacts::new(serde_json::to_value(&r).expect("report serializes"))
        .assert(check("right-hand sides finite", finite, ""))
        .finding(check("gap within covering bound", !r.violated, format!("{} <= {}", r.gap, r.theorem3_rhs)))
        .table("bound.csv", csv))
}

fn coverage(cfg: &RunConfig, seed: u64) -> Result<Artifacts, CliError> {
    let r = bound_coverage_experiment(
        &cfg.class,
        &cfg.distribution,
        &cfg.vicinity,
        cfg.n,
        cfg.t,
        cfg.xi,
        cfg.trials,
        cfg.budget,
        seed,
    )?;
    let csv = r.to_csv();
    let freq = r.violation_frequency;
    Ok(Artifacts::new(json!({
        "n": r.n,
        "t": r.t,
        "xi": r.xi,
        "trials": r.trials,
        "exponent": r.exponent,
        "violation_frequency": freq,
    }))
    .finding(check(
        "violation frequency <= t + 3 SE",
        r.within_tolerance,
        format!("{} (SE {})", freq.value, freq.std_error),
    ))
    .table("coverage.csv", csv))
}
