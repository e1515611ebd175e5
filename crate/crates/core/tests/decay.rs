use std::sync::Arc;

use hyperlab::asymptotic::{log_grid, FieldSpec};
use hyperlab::decay::*;
use hyperlab::freefield::{FockBasis, ModeGrid};
use hyperlab::oscillatory::QuadratureSpec;
use hyperlab::profiles::{HyperboloidProfile, MomentumSmearing, RadialProfile};
use hyperlab::{FourVector, HyperboloidPoint, LorentzBoost};
use proptest::prelude::*;

fn gauss(center: FourVector, width: f64) -> SpacetimeBump {
    SpacetimeBump::sharp(center, Spatial::Gaussian { width }).unwrap()
}

fn bump(radius: f64) -> SpacetimeBump {
    SpacetimeBump::sharp(FourVector::ZERO, Spatial::Bump { radius }).unwrap()
}

/// Spacelike offsets with |a⃗| − |a⁰| from 0.5 to 20, on two time slices.
fn offsets() -> Vec<FourVector> {
    log_grid(0.5, 20.0, 8)
        .into_iter()
        .flat_map(|s| [FourVector::new(0.0, s, 0.0, 0.0), FourVector::new(1.0, 0.0, 0.6 * (s + 1.0), 0.8 * (s + 1.0))])
        .collect()
}

fn gaussian_measure(widths: &[f64]) -> ShellMeasure {
    gaussian_measure_reaching(widths, 30.0)
}

fn gaussian_measure_reaching(widths: &[f64], reach: f64) -> ShellMeasure {
    let gs: Vec<SpacetimeBump> = widths.iter().map(|w| gauss(FourVector::ZERO, *w)).collect();
    let refs: Vec<&dyn SphericalSmearing> = gs.iter().map(|g| g as &dyn SphericalSmearing).collect();
    ShellMeasure::Continuum(ContinuumShell::for_smearings(1.0, &refs, reach).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn commutator_function_is_antisymmetric_and_imaginary(
        t in -3.0f64..3.0, x in -4.0f64..4.0, y in -4.0f64..4.0, z in -4.0f64..4.0,
        w1 in 0.4f64..1.0, w2 in 0.4f64..1.0,
    ) {
        let g1 = gauss(FourVector::ZERO, w1);
        let g2 = gauss(FourVector::ZERO, w2);
        // |a⃗| + |a⁰| ≤ 3 + 4√3 on the sampled box
        let m = ShellMeasure::Continuum(ContinuumShell::for_smearings(1.0, &[&g1, &g2], 12.0).unwrap());
        let a = FourVector::new(t, x, y, z);
        let c12 = pauli_jordan_smeared(&g1, &g2, &a, &m).unwrap();
        let c21 = pauli_jordan_smeared(&g2, &g1, &-a, &m).unwrap();
        let scale = pauli_jordan_smeared(&g1, &g2, &FourVector::new(0.5, 0.0, 0.0, 0.0), &m).unwrap().norm();
        prop_assert!((c12 + c21).norm() <= 1e-12 * scale);
        prop_assert!(c12.re.abs() <= 1e-12 * scale);
    }
}

#[test]
fn gaussian_commutators_sit_under_both_templates() {
    let (g1, g2) = (gauss(FourVector::ZERO, 0.5), gauss(FourVector::ZERO, 0.7));
    let m = gaussian_measure(&[0.5, 0.7]);
    for kappa in [4.0, 3.5] {
        let scan = commutator_decay_scan(&m, &g1, &g2, &offsets(), kappa, 1.0).unwrap();
        assert!(scan.satisfied, "κ = {kappa}: {scan:?}");
        assert!(scan.c > 0.0);
        assert!(scan.residuals.iter().all(|r| *r >= -1e-15 * scan.c));
    }
}

#[test]
fn compactly_supported_commutators_vanish_beyond_the_supports() {
    let (g1, g2) = (bump(0.5), bump(0.5));
    let m = ShellMeasure::Continuum(ContinuumShell::for_smearings(1.0, &[&g1, &g2], 30.0).unwrap());
    let scan = commutator_decay_scan(&m, &g1, &g2, &offsets(), 4.0, 1.0).unwrap();
    assert!(scan.satisfied);
    // sharp-time smearings commute at equal times, so only the t = 1 slice is nonzero
    let near = scan.values.iter().copied().fold(0.0, f64::max);
    assert!(near > 0.0);
    for (s, v) in scan.separations.iter().zip(&scan.values) {
        if *s > 1.2 {
            assert!(*v < 1e-9 * near, "s = {s}: {v} against {near}");
        }
    }
}

#[test]
fn boosted_frames_keep_the_template() {
    let (g1, g2) = (gauss(FourVector::ZERO, 0.5), gauss(FourVector::ZERO, 0.7));
    let m = gaussian_measure_reaching(&[0.5, 0.7], 60.0);
    let boost = LorentzBoost::along([0.0, 0.0, 1.0], 0.6);
    let scan = boosted_decay_scan(&m, &g1, &g2, &offsets(), &boost, 4.0, 1.0).unwrap();
    assert!(scan.satisfied, "{scan:?}");
    // boosting by the identity reproduces the plain scan
    let plain = commutator_decay_scan(&m, &g1, &g2, &offsets(), 4.0, 1.0).unwrap();
    let same = boosted_decay_scan(&m, &g1, &g2, &offsets(), &LorentzBoost::identity(), 4.0, 1.0).unwrap();
    assert_eq!(plain.values, same.values);
}

#[test]
fn extra_smearing_preserves_the_decay() {
    let g1: Arc<dyn SphericalSmearing> = Arc::new(gauss(FourVector::ZERO, 0.5));
    let g2: Arc<dyn SphericalSmearing> = Arc::new(gauss(FourVector::ZERO, 0.7));
    let m = gaussian_measure(&[0.5, 0.7, 0.1, 2.0]);
    let narrow: Arc<dyn SphericalSmearing> = Arc::new(gauss(FourVector::ZERO, 0.1));
    let wide: Arc<dyn SphericalSmearing> = Arc::new(gauss(FourVector::ZERO, 2.0));
    let zero: Arc<dyn SphericalSmearing> =
        Arc::new(SpacetimeBump::new(FourVector::ZERO, Temporal::Sharp, Spatial::Gaussian { width: 1.0 }, 0.0).unwrap());
    let n = smearing_preservation_check(&m, g1.clone(), g2.clone(), narrow, &offsets(), 4.0, 1.0).unwrap();
    assert!(n.base.satisfied && n.smeared.satisfied);
    assert!(n.c_ratio > 0.0 && n.c_ratio.is_finite());
    let w = smearing_preservation_check(&m, g1.clone(), g2.clone(), wide, &offsets(), 4.0, 1.0).unwrap();
    assert!(w.smeared.satisfied, "{w:?}");
    let z = smearing_preservation_check(&m, g1, g2, zero, &offsets(), 4.0, 1.0).unwrap();
    assert_eq!(z.smeared.c, 0.0);
    assert!(z.smeared.satisfied);
}

#[test]
fn scans_must_be_spacelike_and_span_enough_decades() {
    let (g1, g2) = (gauss(FourVector::ZERO, 0.5), gauss(FourVector::ZERO, 0.7));
    let m = gaussian_measure(&[0.5, 0.7]);
    let short: Vec<FourVector> = log_grid(1.0, 10.0, 4).into_iter().map(|s| FourVector::new(0.0, s, 0.0, 0.0)).collect();
    assert!(commutator_decay_scan(&m, &g1, &g2, &short, 4.0, 1.0).is_err());
    let mut timelike = offsets();
    timelike.push(FourVector::new(3.0, 1.0, 0.0, 0.0));
    assert!(commutator_decay_scan(&m, &g1, &g2, &timelike, 4.0, 1.0).is_err());
}

#[test]
fn continuum_and_lattice_commutators_agree() {
    let g1 = gauss(FourVector::ZERO, 0.8);
    let g2 = gauss(FourVector::new(0.0, 0.0, 0.4, 0.0), 0.9);
    let a = FourVector::new(0.3, 0.6, 0.0, 0.2);
    let cont = pauli_jordan_smeared(&g1, &g2, &a, &gaussian_measure(&[0.8, 0.9])).unwrap();
    let lat = pauli_jordan_lattice(&ModeGrid::new(1.0, 0.15, 9.0).unwrap(), &g1, &g2, &a).unwrap();
    assert!((cont - lat).norm() < 1e-6 * cont.norm(), "{cont} vs {lat}");
}

#[test]
fn disjoint_hyperboloid_commutators_decay_in_the_product_of_scales() {
    let grid = ModeGrid::new(1.0, 0.25, 1.0).unwrap();
    let spec = FieldSpec::with_base(grid, Arc::new(bump(1.0)), QuadratureSpec::default());
    let f1 = HyperboloidProfile::new(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], -0.5), 0.3, 1.0).unwrap();
    let f2 = HyperboloidProfile::new(HyperboloidPoint::from_rapidity([0.96, 0.28, 0.0], 0.55), 0.25, 1.0).unwrap();
    let gap = support_gap(&f1, &f2);
    let scan = hyperboloid_commutator_scan(&spec, &f1, &f2, &log_grid(30.0, 300.0, 4), gap / 2.0, 3).unwrap();
    assert_eq!(scan.rows.len(), 3);
    assert!(scan.worst_slope() <= -0.5, "{scan:?}");
    assert!(hyperboloid_commutator_scan(&spec, &f1, &f2, &[30.0, 300.0], gap, 3).is_err());
}

#[test]
fn diagonal_commutators_are_bounded_by_the_overlap() {
    let grid = ModeGrid::new(1.0, 0.25, 1.0).unwrap();
    let spec = FieldSpec::with_base(grid, Arc::new(bump(1.0)), QuadratureSpec::default());
    let owned: Vec<(HyperboloidProfile, HyperboloidProfile)> = (0..3)
        .map(|i| {
            let s = 0.1 * i as f64;
            (
                HyperboloidProfile::new(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], -0.1 - 0.5 * s), 0.4 + 0.05 * i as f64, 1.0).unwrap(),
                HyperboloidProfile::new(HyperboloidPoint::from_rapidity([0.0, 1.0, 0.0], 0.1 + 0.3 * s), 0.5, 1.0).unwrap(),
            )
        })
        .collect();
    let pairs: Vec<(&dyn RadialProfile, &dyn RadialProfile)> = owned.iter().map(|(a, b)| (a as &dyn RadialProfile, b as &dyn RadialProfile)).collect();
    let rep = diagonal_commutator_check(&spec, &pairs, &log_grid(30.0, 300.0, 5)).unwrap();
    assert!(rep.satisfied, "{rep:?}");
    let apart = HyperboloidProfile::new(HyperboloidPoint::from_rapidity([1.0, 0.0, 0.0], 2.0), 0.3, 1.0).unwrap();
    let disjoint: [(&dyn RadialProfile, &dyn RadialProfile); 1] = [(&owned[0].0, &apart)];
    assert!(diagonal_commutator_check(&spec, &disjoint, &[30.0, 300.0]).is_err());
}

fn cluster_points() -> [(FourVector, FourVector, FourVector); 2] {
    [
        (FourVector::new(0.1, 0.2, 0.0, 0.3), FourVector::new(-0.2, 0.0, 0.3, 0.1), FourVector::new(0.5, 1.0, 0.2, 0.0)),
        (FourVector::new(0.2, 0.5, 0.0, 0.0), FourVector::new(0.3, 0.0, 0.0, 0.4), FourVector::new(-0.4, 0.0, 1.5, 0.3)),
    ]
}

#[test]
fn wick_square_cluster_function_matches_the_fock_computation() {
    let grid = ModeGrid::new(1.0, 0.5, 0.5).unwrap();
    let basis = FockBasis::new(&grid, 4, 5000).unwrap();
    let gs: Vec<SpacetimeBump> = [0.6, 0.7, 0.8, 0.6].iter().enumerate().map(|(i, w)| gauss(FourVector::new(0.0, 0.1 * i as f64, 0.0, 0.0), *w)).collect();
    let refs: Vec<&dyn SphericalSmearing> = gs.iter().map(|g| g as &dyn SphericalSmearing).collect();
    let m = ShellMeasure::Lattice(grid.clone());
    let p: [PreparedSmearing; 4] = m.prepare_all(&refs).unwrap().try_into().unwrap();
    let chis: [&dyn MomentumSmearing; 4] = [&gs[0], &gs[1], &gs[2], &gs[3]];
    for (y1, y2, y) in cluster_points() {
        let closed = cluster_function_k(&m, &p, &y1, &y2, &y).unwrap();
        let fock = cluster_function_k_fock(&grid, &basis, chis, LocalOperator::WickSquare, &y1, &y2, &y).unwrap();
        assert!(closed.norm() > 0.0);
        assert!((closed - fock).norm() <= 1e-8 * closed.norm(), "{closed} vs {fock}");
        let elementary = cluster_function_k_fock(&grid, &basis, chis, LocalOperator::Elementary, &y1, &y2, &y).unwrap();
        assert!(elementary.norm() <= 1e-12 * closed.norm(), "{elementary}");
    }
    let small = FockBasis::new(&grid, 3, 5000).unwrap();
    let (y1, y2, y) = cluster_points()[0];
    assert!(cluster_function_k_fock(&grid, &small, chis, LocalOperator::WickSquare, &y1, &y2, &y).is_err());
}

#[test]
fn cluster_template_dominates_with_room_to_spare() {
    let d = 0.5;
    let gs: Vec<SpacetimeBump> = (0..4).map(|_| bump(d)).collect();
    let refs: Vec<&dyn SphericalSmearing> = gs.iter().map(|g| g as &dyn SphericalSmearing).collect();
    let m = ShellMeasure::Continuum(ContinuumShell::for_smearings(1.0, &refs, 30.0).unwrap());
    let p: [PreparedSmearing; 4] = m.prepare_all(&refs).unwrap().try_into().unwrap();
    let (y1, y2) = (FourVector::new(0.1, 0.2, 0.0, 0.3), FourVector::new(-0.2, 0.0, 0.3, 0.1));
    let points: Vec<ClusterPoint> = [4.0, 6.0, 8.0, 12.0]
        .iter()
        .map(|s| {
            let y = FourVector::new(0.5, s + 0.5, 0.0, 0.0);
            ClusterPoint { y1, y2, y, d, value: cluster_function_k(&m, &p, &y1, &y2, &y).unwrap() }
        })
        .collect();
    let scan = cluster_template_fit(&points, 8.0).unwrap();
    assert!(scan.satisfied, "{scan:?}");
    let inside = ClusterPoint { y: FourVector::new(0.5, 2.0, 0.0, 0.0), ..points[0] };
    assert!(cluster_template_fit(&[inside], 8.0).is_err());
}

#[test]
fn ahr_bound_quarters_on_doubling_and_vanishes_for_annihilators() {
    let g: Arc<dyn SphericalSmearing> = Arc::new(bump(0.5));
    let m = ShellMeasure::Continuum(ContinuumShell::for_smearings(1.0, &[g.as_ref()], 30.0).unwrap());
    let full = QuadraticSpec { smearing: g.clone(), annihilator_only: false };
    let lowering = QuadraticSpec { smearing: g, annihilator_only: true };
    let ys: Vec<FourVector> =
        [1.0, 2.0, 4.0, 8.0, 16.0].iter().flat_map(|s| [FourVector::new(0.0, *s, 0.0, 0.0), FourVector::new(1.0, 0.0, s + 1.0, 0.0)]).collect();
    let rep = ahr_bound_check(&m, &full, &full, &ys, 0.5).unwrap();
    assert!(rep.quartering_holds, "{:?}", rep.doubling_ratios);
    assert!(!rep.doubling_ratios.is_empty());
    assert!(rep.points.iter().all(|p| p.value <= rep.constant * p.envelope * (1.0 + 1e-12)));
    let zero = ahr_bound_check(&m, &full, &lowering, &ys, 0.5).unwrap();
    assert!(zero.points.iter().all(|p| p.value == 0.0));
    let skipped = ahr_bound_check(&m, &full, &full, &[FourVector::new(1.0, 1.5, 0.0, 0.0)], 0.5).unwrap();
    assert_eq!(skipped.skipped.len(), 1);
}
