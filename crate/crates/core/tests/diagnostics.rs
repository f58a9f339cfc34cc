use rand::Rng as _;
use vrm_core::diagnostics::{
    bound_coverage_experiment, corollary1_rhs, hoeffding_one_sided, omega_nu_cover_form, omega_nu_risk_form,
    prob_eta_negative, theorem3_rhs,
};
use vrm_core::rng::rng_from_seed;
use vrm_core::{FunctionClass, Hypothesis, LossSpec, MonteCarloBudget, SyntheticDistribution, VicinitySpec};

const WEIGHTS: [f64; 3] = [0.5, 1.0, 2.0];

fn wide_base() -> Vec<Hypothesis> {
    WEIGHTS.iter().map(|&w| Hypothesis::linear(vec![w], LossSpec::squared(1e6))).collect()
}

fn data() -> SyntheticDistribution {
    SyntheticDistribution::linear_regression(vec![1.0], 0.3)
}

#[test]
fn dirac_omega_is_centred() {
    let o = omega_nu_cover_form(&wide_base(), &VicinitySpec::dirac(), &data(), 30, 0.2, 200, 1, 1).unwrap();
    assert!(o.value.abs() <= 3.0 * o.std_error, "{} (SE {})", o.value, o.std_error);
    let r = omega_nu_risk_form(&wide_base(), &[0, 1, 2], &VicinitySpec::dirac(), &data(), 1, 100, 1, 2).unwrap();
    assert_eq!(r.value, 0.0);
}

#[test]
fn gaussian_omega_matches_closed_form() {
    let sigma = 0.3;
    let spec = VicinitySpec::gaussian(sigma);
    let o = omega_nu_cover_form(&wide_base(), &spec, &data(), 30, 0.2, 200, 16, 3).unwrap();
    let exact = o.members.iter().map(|&i| -sigma * sigma * WEIGHTS[i] * WEIGHTS[i]).fold(f64::NEG_INFINITY, f64::max);
    assert!((o.value - exact).abs() <= 4.0 * o.std_error, "{} vs {exact} (SE {})", o.value, o.std_error);

    let r = omega_nu_risk_form(&wide_base(), &[0, 1, 2], &spec, &data(), 1, 20_000, 16, 4).unwrap();
    for (e, w) in r.per_member.iter().zip(WEIGHTS) {
        let exact = -sigma * sigma * w * w;
        assert!((e.value - exact).abs() <= 4.0 * e.std_error, "{} vs {exact}", e.value);
    }
    // Both forms put the sign below zero by a clear margin.
    assert!(r.value + 3.0 * r.std_error < 0.0);
    assert!(o.value + 3.0 * o.std_error < 0.0);
}

#[test]
fn eta_baselines() {
    let fam = FunctionClass::LinearFamily {
        input_dim: 1,
        output_dim: 1,
        weight_bound: 5.0,
        fit_bias: false,
        loss: LossSpec::squared(4.0),
    };
    let budget = MonteCarloBudget { phi_draws: 32, risk_draws: 4000 };
    let dirac = prob_eta_negative(&fam, &data(), 30, &VicinitySpec::dirac(), 100, budget, 7).unwrap();
    assert_eq!(dirac.probability.value, 0.52);
    let gauss = prob_eta_negative(&fam, &data(), 30, &VicinitySpec::gaussian(0.1), 100, budget, 8).unwrap();
    assert_eq!(gauss.probability.value, 0.66);
    // A Gaussian vicinity inflates the vicinal risk, pushing eta1 below zero.
    assert!(gauss.mean_eta1 < 0.0);
    for r in dirac.rows.iter().chain(&gauss.rows) {
        assert_eq!(r.eta.value.to_bits(), (r.eta1.value - r.eta2.value).to_bits());
    }
}

#[test]
fn right_hand_side_baselines() {
    let rhs = theorem3_rhs(-0.02, 8.0, 512, 0.1, 0.0, 1.0).unwrap();
    let hand = 4.0 * -0.02 + (32.0 * (8f64.ln() - 0.05f64.ln()) / 512.0).sqrt();
    assert!((rhs - hand).abs() < 1e-12);
    assert!((rhs - 0.483203).abs() < 1e-6);
    assert_eq!(corollary1_rhs(-0.02, 3.0, 6.0, 512, 0.1, 0.0, 1.0, 0.3, 2, 2.0).unwrap(), 0.4258646236550461);
    assert!(theorem3_rhs(0.0, 1.0, 10, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn coverage_baseline() {
    let class = FunctionClass::finite(
        [0.2, 0.6, 1.0, 1.4, 1.8].iter().map(|&w| Hypothesis::linear(vec![w], LossSpec::squared(1.0))).collect(),
    );
    let budget = MonteCarloBudget { phi_draws: 16, risk_draws: 20_000 };
    let r = bound_coverage_experiment(&class, &data(), &VicinitySpec::gaussian(0.1), 200, 0.5, 0.2, 100, budget, 6)
        .unwrap();
    assert_eq!(r.violation_frequency.value, 0.0);
    assert!(r.within_tolerance);
    let max_gap = r.rows.iter().map(|x| x.gap).fold(f64::NEG_INFINITY, f64::max);
    let min_rhs = r.rows.iter().map(|x| x.rhs).fold(f64::INFINITY, f64::min);
    assert!(max_gap < min_rhs, "{max_gap} vs {min_rhs}");
}

#[test]
fn hoeffding_dominates_simulated_tail() {
    let n = 10;
    let means = vec![0.5; n];
    let ranges = vec![(0.0, 1.0); n];
    let mut rng = rng_from_seed(9);
    for xi in [5.5, 6.0, 7.0, 8.0] {
        let bound = hoeffding_one_sided(xi, &means, &ranges).unwrap();
        let hits = (0..100_000).filter(|_| (0..n).map(|_| rng.random::<f64>()).sum::<f64>() >= xi).count();
        assert!(hits as f64 / 1e5 <= bound, "xi {xi}: {hits} vs {bound}");
    }
    assert_eq!(hoeffding_one_sided(4.0, &means, &ranges).unwrap(), 1.0);
    assert!(hoeffding_one_sided(1.0, &means, &ranges[1..]).is_err());
}
