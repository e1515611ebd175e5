use hyperlab::asymptotic::*;
use hyperlab::freefield::*;
use hyperlab::oscillatory::QuadratureSpec;
use hyperlab::profiles::{HyperboloidProfile, MomentumProfile, RadialProfile, TimeKernel};
use hyperlab::HyperboloidPoint;
use num_complex::Complex64;
use proptest::prelude::*;

struct Setup {
    spec: FieldSpec,
    f: HyperboloidProfile,
    chi: MomentumProfile,
    h: TimeKernel,
}

fn setup(center: HyperboloidPoint, radius: f64) -> Setup {
    let grid = ModeGrid::new(1.0, 0.25, 0.6).unwrap();
    let f = HyperboloidProfile::new(center, radius, 1.0).unwrap();
    let chi = MomentumProfile::plateau_around(1.0, &f, 0.1).unwrap();
    Setup { spec: FieldSpec::bare(grid, QuadratureSpec::default()), f, chi, h: TimeKernel::new(0.5, 1.5).unwrap() }
}

#[test]
fn shell_operator_on_the_vacuum_is_the_multiplied_one_particle_vector() {
    let s = setup(HyperboloidPoint::from_rapidity([0.0, 1.0, 1.0], 0.2), 0.9);
    let basis = FockBasis::new(&s.spec.grid, 2, 5000).unwrap();
    let omega = basis.vacuum_vector();
    let lhs = primed_field(&s.spec, &s.chi, &s.f, &s.h, 40.0).unwrap().field.to_matrix(&basis, "P").apply(&omega);
    // (2π)² f(P/m) E₀ Ψ Ω, built state by state
    let psi = s.spec.base_field().to_matrix(&basis, "Psi").apply(&omega);
    let e0 = shell_projector(&basis, 1.0, 1e-9);
    let mut rhs = e0.apply(&psi);
    for i in 0..basis.dim() {
        let p = basis.momenta[i];
        if e0.mask[i] {
            rhs[i] *= TWO_PI_SQ * s.f.value(&HyperboloidPoint::new(p.xs));
        }
    }
    let scale = rhs.norm();
    assert!(scale > 0.0);
    assert!((lhs - rhs).norm() <= 1e-10 * scale);
}

#[test]
fn shell_operator_only_moves_states_by_shell_energies() {
    let s = setup(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], 0.5), 0.3);
    let basis = FockBasis::new(&s.spec.grid, 2, 5000).unwrap();
    let op = primed_field(&s.spec, &s.chi, &s.f, &s.h, 100.0).unwrap().field.to_matrix(&basis, "P");
    let (lo, hi) = shell_energy_range(&s.f, 1.0);
    let d1 = energy_band(&basis, 1.0, 1.1);
    let reachable = energy_band(&basis, 1.0 + lo, 1.1 + hi);
    assert!(transfer_residual(&op, &d1, &reachable.complement()) <= 1e-13);
    assert!(transfer_residual(&op, &d1, &reachable) > 1e-3);
}

#[test]
fn out_field_converges_at_the_first_inverse_power() {
    let s = setup(HyperboloidPoint::ORIGIN, 2.0);
    let basis = FockBasis::new(&s.spec.grid, 1, 5000).unwrap();
    // on the one-particle truncation only the vacuum column survives
    let window = vacuum_complement(&basis).complement();
    let out = out_field(&s.spec, &s.chi, &s.f, &log_grid(30.0, 300.0, 5), &basis, &window).unwrap();
    assert_eq!(out.verdict, OutFieldVerdict::Converges);
    assert!((out.rate.slope + 1.0).abs() < 0.1, "{}", out.rate.slope);
    let miss = field_distance(&out.extrapolated, &out.limit);
    assert!(miss < 10.0 * out.extrapolation_error.max(1e-12), "{miss} vs {}", out.extrapolation_error);
}

#[test]
fn out_field_needs_a_plateau_over_the_profile() {
    let s = setup(HyperboloidPoint::ORIGIN, 2.0);
    let basis = FockBasis::new(&s.spec.grid, 1, 5000).unwrap();
    let window = vacuum_complement(&basis);
    let narrow = MomentumProfile::plateau_around(1.0, &HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 0.5, 1.0).unwrap(), 0.1).unwrap();
    assert!(out_field(&s.spec, &narrow, &s.f, &[30.0, 300.0], &basis, &window).is_err());
    let smooth = MomentumProfile::smooth(1.0, s.f.clone()).unwrap();
    assert!(out_field(&s.spec, &smooth, &s.f, &[30.0, 300.0], &basis, &window).is_err());
}

#[test]
fn time_averages_approach_the_shell_operator_at_the_first_inverse_power() {
    let s = setup(HyperboloidPoint::ORIGIN, 2.0);
    let basis = FockBasis::new(&s.spec.grid, 2, 5000).unwrap();
    let window = energy_window(&basis, 3.0, 1);
    let pd = primed_difference(&s.spec, &s.chi, &s.f, &s.h, &log_grid(30.0, 300.0, 5), &basis, &window, KernelRule::default()).unwrap();
    assert!((pd.rate.slope + 1.0).abs() < 0.1, "{:?}", pd.norms);
}

#[test]
fn kernel_scaling_does_not_change_the_limit() {
    let s = setup(HyperboloidPoint::ORIGIN, 2.0);
    let k = kernel_independence_check(&s.spec, &s.chi, &s.f, &s.h, &log_grid(30.0, 300.0, 5), (0.5, 1.0), KernelRule::default()).unwrap();
    assert!(k.agree, "{k:?}");
    assert!(k.shell_distances.0 < 1e-3 && k.shell_distances.1 < 1e-3);
}

#[test]
fn vacuum_product_tends_to_the_shell_overlap() {
    let s = setup(HyperboloidPoint::ORIGIN, 2.0);
    let basis = FockBasis::new(&s.spec.grid, 1, 5000).unwrap();
    let rep = two_operator_product_check(&s.spec, &s.spec, &s.chi, &s.f, &s.f, &s.h, &log_grid(30.0, 300.0, 5), 1.0 / 3.0, &basis).unwrap();
    let last = *rep.residuals.last().unwrap();
    assert!(last < rep.residuals[0], "{:?}", rep.residuals);
    assert!(last < 1e-3, "{:?}", rep.residuals);
    assert!(rep.orthogonal.iter().all(|o| *o < 1e-12));
}

#[test]
fn creation_only_averages_commute_and_cross_terms_decay() {
    let grid = ModeGrid::new(1.0, 0.5, 0.9).unwrap();
    let spec = FieldSpec::bare(grid, QuadratureSpec::default());
    let f1 = HyperboloidProfile::new(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], -0.6), 0.3, 1.0).unwrap();
    let f2 = HyperboloidProfile::new(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], 0.6), 0.3, 1.0).unwrap();
    let both = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.5, 1.0).unwrap();
    let chi = MomentumProfile::plateau_around(1.0, &both, 0.1).unwrap();
    let basis = FockBasis::new(&spec.grid, 3, 5000).unwrap();
    let window = energy_window(&basis, f64::INFINITY, 1);
    let h = TimeKernel::new(0.5, 1.5).unwrap();
    let lams = [30.0, 100.0, 300.0];
    let rep = asymptotic_commutator_check(&spec, &chi, &chi, &f1, &f2, &f1, &h, &lams, &basis, &window).unwrap();
    assert!(rep.combinations[0].norms.iter().all(|n| *n < 1e-12));
    assert!(rep.combinations[3].norms.iter().all(|n| *n < 1e-12));
    for combo in &rep.combinations[1..3] {
        assert!(combo.norms[2] < combo.norms[0], "{combo:?}");
    }
    assert!(asymptotic_commutator_check(&spec, &chi, &chi, &f1, &f1, &f1, &h, &lams, &basis, &window).is_err());
    assert!(f1.center().distance(&f2.center()) > f1.support_radius() + f2.support_radius());
}

proptest! {
    #[test]
    fn rate_fit_recovers_power_laws(slope in -3.0f64..0.5, amp in 1e-6f64..1e3) {
        let xs = log_grid(10.0, 1000.0, 7);
        let ys: Vec<f64> = xs.iter().map(|x| amp * x.powf(slope)).collect();
        let fit = RateFit::fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-10 || slope.abs() < 1e-9);
    }

    #[test]
    fn richardson_is_exact_on_first_order_tails(limit in -5.0f64..5.0, a in -10.0f64..10.0) {
        let ls = [20.0, 40.0, 80.0];
        let vals: Vec<Vec<Complex64>> = ls.iter().map(|l| vec![Complex64::new(limit + a / l, -a / l)]).collect();
        let (lim, err) = richardson(&ls, &vals).unwrap();
        prop_assert!((lim[0] - Complex64::new(limit, 0.0)).norm() < 1e-10 * (1.0 + a.abs()));
        prop_assert!(err < 1e-10 * (1.0 + a.abs()));
    }
}
