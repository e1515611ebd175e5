use hyperlab::asymptotic::{log_grid, RateFit};
use hyperlab::oscillatory::*;
use hyperlab::profiles::{HyperboloidProfile, RadialProfile};
use hyperlab::{HyperboloidPoint, LorentzBoost};
use num_complex::Complex64;
use proptest::prelude::*;

fn tight() -> QuadratureSpec {
    QuadratureSpec { abs_tol: 1e-11, ..Default::default() }
}

#[test]
fn narrow_profile_fixture_agrees_between_schemes() {
    let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 0.5, 1.0).unwrap();
    let v = HyperboloidPoint::new([0.1, 0.0, 0.0]);
    let reduced = integrate_wavepacket(&f, 50.0, &v, &tight()).unwrap().value;
    let tensor = integrate_wavepacket_tensor(&f, 50.0, &v, 24, 8, 32);
    assert!((reduced - tensor).norm() < 1e-8, "{reduced} vs {tensor}");
    let stored = Complex64::new(REGRESSION_RE, REGRESSION_IM);
    assert!((reduced - stored).norm() < 1e-8, "{reduced} vs stored {stored}");
}

const REGRESSION_RE: f64 = -0.0029568658791667675;
const REGRESSION_IM: f64 = 0.020193726425665803;

#[test]
fn batched_integrals_match_single_ones() {
    let f = HyperboloidProfile::new(HyperboloidPoint::new([0.1, 0.2, 0.0]), 1.0, 1.0).unwrap();
    let v = HyperboloidPoint::new([0.3, 0.0, 0.1]);
    let rhos = log_grid(20.0, 200.0, 9);
    let spec = QuadratureSpec::default();
    for sign in [1.0, -1.0] {
        let batch = integrate_wavepacket_many(&f, &rhos, &v, sign, &spec).unwrap();
        for (b, rho) in batch.iter().zip(&rhos) {
            let single = integrate_wavepacket_signed(&f, *rho, &v, sign, &spec).unwrap();
            assert!((b.normalized - single.normalized).norm() < 4.0 * spec.abs_tol);
        }
    }
}

#[test]
fn integral_is_covariant_under_boosts() {
    let f = HyperboloidProfile::new(HyperboloidPoint::new([0.2, 0.0, -0.1]), 0.7, 1.0).unwrap();
    let v = HyperboloidPoint::new([0.0, 0.3, 0.0]);
    let b = LorentzBoost::along([0.3, 1.0, 0.2], 0.8);
    let g = HyperboloidProfile::new(b.apply_point(&f.center()), 0.7, 1.0).unwrap();
    let a = integrate_wavepacket_tensor(&f, 30.0, &v, 20, 8, 32);
    let c = integrate_wavepacket_tensor(&g, 30.0, &b.apply_point(&v), 20, 8, 32);
    assert!((a - c).norm() < 1e-9, "{a} vs {c}");
}

#[test]
fn expansion_errors_decay_at_the_expected_rates() {
    let f = HyperboloidProfile::new(HyperboloidPoint::new([0.0, 0.1, 0.3]), 2.5, 1.0).unwrap();
    let v = HyperboloidPoint::new([0.1, 0.1, 0.1]);
    let rhos = log_grid(30.0, 300.0, 9);
    let rows: Vec<ExpansionResult> = rhos.iter().map(|r| expansion_at(&f, *r, &v, 2, &tight()).unwrap()).collect();
    for n in 0..3 {
        let ys: Vec<f64> = rows.iter().map(|e| (e.oracle - e.terms[..=n].iter().sum::<Complex64>()).norm()).collect();
        let slope = RateFit::fit(&rhos, &ys).unwrap().slope;
        assert!(slope <= -(n as f64 + 1.0) + 0.3, "N = {n}: slope {slope}");
    }
    let fit = extract_lk(&f, &v, 3, &rhos, &tight()).unwrap();
    assert!((fit.coeffs[0] - f.value_at(&v)).norm() < 1e-6);
}

#[test]
fn corrections_agree_with_the_fitted_coefficients() {
    let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 2.5, 1.0).unwrap();
    let vs = [HyperboloidPoint::new([0.2, 0.0, 0.0]), HyperboloidPoint::new([0.0, 0.4, 0.1])];
    // the truncated fit only resolves the second coefficient once ρ ≳ 60 for this width
    let out = recursive_corrections(&f, 2, &vs, &log_grid(60.0, 600.0, 9), &tight()).unwrap();
    assert!(out.fit_discrepancy <= CORRECTION_FIT_BUDGET, "{}", out.fit_discrepancy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn integral_is_linear_in_the_profile(a in -3.0f64..3.0, b in -3.0f64..3.0, rho in 10.0f64..80.0) {
        let c = HyperboloidPoint::new([0.1, -0.2, 0.0]);
        let f = HyperboloidProfile::new(c, 0.8, 1.0).unwrap();
        let v = HyperboloidPoint::new([0.05, 0.0, 0.2]);
        let spec = QuadratureSpec::default();
        let one = integrate_wavepacket(&f, rho, &v, &spec).unwrap().value;
        let combo = integrate_wavepacket(&f.with_amplitude(a + b), rho, &v, &spec).unwrap().value;
        let scale = (2.0 * std::f64::consts::PI / rho).powf(1.5);
        prop_assert!((combo - (a + b) * one).norm() < 1e-8 * scale * (1.0 + (a + b).abs()));
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.0, 1.0).unwrap();
    assert!(integrate_wavepacket(&f, -1.0, &HyperboloidPoint::ORIGIN, &QuadratureSpec::default()).is_err());
    assert!(integrate_wavepacket(&f, 10.0, &HyperboloidPoint::ORIGIN, &QuadratureSpec { abs_tol: 0.0, ..Default::default() }).is_err());
    // Less than a decade of ρ cannot separate the powers.
    assert!(extract_lk(&f, &HyperboloidPoint::ORIGIN, 2, &[30.0, 40.0, 50.0, 60.0], &QuadratureSpec::default()).is_err());
}
