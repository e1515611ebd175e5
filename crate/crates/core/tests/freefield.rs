use hyperlab::freefield::*;
use hyperlab::minkowski::FourVector;
use hyperlab::profiles::{HyperboloidProfile, MomentumProfile};
use hyperlab::HyperboloidPoint;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small() -> (ModeGrid, FockBasis) {
    let g = ModeGrid::new(1.0, 0.5, 0.5).unwrap();
    let b = FockBasis::new(&g, 3, 1000).unwrap();
    (g, b)
}

fn below(basis: &FockBasis, layer: usize) -> Vec<bool> {
    (0..basis.dim()).map(|i| basis.particle_number(i) <= layer).collect()
}

fn textured(n: usize, seed: f64) -> LinearField {
    let mut f = LinearField::zero(n);
    for k in 0..n {
        let t = seed + k as f64;
        f.creation[k] = c((1.3 * t).sin(), (0.7 * t).cos());
        f.annihilation[k] = c((0.4 * t).cos(), -(1.1 * t).sin());
    }
    f
}

#[test]
fn canonical_commutators_hold_below_the_top_layer() {
    let (g, b) = small();
    let mask = below(&b, b.n_max - 1);
    for i in 0..g.len() {
        for j in 0..g.len() {
            let comm = annihilator(&b, i).commutator(&creator(&b, j)).project_columns(&mask);
            let expected = if i == j { Projector { mask: mask.clone() }.to_matrix() } else { OperatorMatrix::zeros(b.dim(), "0") };
            assert!(comm.max_abs_diff(&expected) < 1e-14, "[a_{i}, a*_{j}]");
            let aa = annihilator(&b, i).commutator(&annihilator(&b, j));
            assert!(aa.max_abs() < 1e-14);
        }
    }
}

#[test]
fn field_commutator_is_the_c_number_on_lower_layers() {
    let (g, b) = small();
    let x = textured(g.len(), 0.3);
    let y = textured(g.len(), 2.9);
    let mask = below(&b, b.n_max - 1);
    let matrix = x.to_matrix(&b, "x").commutator(&y.to_matrix(&b, "y")).project_columns(&mask);
    let scalar = Projector { mask }.to_matrix().scale(x.commutator(&y));
    assert!(matrix.max_abs_diff(&scalar) < 1e-13);
}

#[test]
fn adjoint_of_the_field_matrix_is_the_adjoint_field() {
    let (g, b) = small();
    let x = textured(g.len(), 1.7);
    assert!(x.to_matrix(&b, "x").adjoint().max_abs_diff(&x.adjoint().to_matrix(&b, "x*")) < 1e-15);
}

#[test]
fn wick_square_subtracts_the_vacuum_expectation() {
    let (g, b) = small();
    let x = textured(g.len(), 0.9);
    let a = x.to_matrix(&b, "x");
    let omega = b.vacuum_vector();
    let vev = omega.dotc(&a.apply(&a.apply(&omega)));
    let mask = below(&b, b.n_max - 2);
    let shifted = a.mul(&a).sub(&OperatorMatrix::identity(b.dim()).scale(vev)).project_columns(&mask);
    assert!(wick_square(&x, &b).project_columns(&mask).max_abs_diff(&shifted) < 1e-12);
}

#[test]
fn translations_act_by_momentum_phases() {
    let (g, b) = small();
    let x = textured(g.len(), 0.2);
    let a = FourVector::new(0.7, -1.2, 0.4, 2.0);
    let via_fock = translate_operator(&b, &x.to_matrix(&b, "x"), &a);
    let via_coefficients = x.translated(&g, &a).to_matrix(&b, "x(a)");
    assert!(via_fock.max_abs_diff(&via_coefficients) < 1e-13);
}

#[test]
fn smeared_field_coefficients_follow_the_smearing() {
    let g = ModeGrid::new(1.0, 0.25, 0.6).unwrap();
    let f = HyperboloidProfile::new(HyperboloidPoint::ORIGIN, 1.0, 1.0).unwrap();
    let chi = MomentumProfile::smooth(1.0, f).unwrap();
    let field = LinearField::from_smearing(&g, &chi);
    for (k, m) in g.modes.iter().enumerate() {
        let s = TWO_PI_SQ * m.weight.sqrt();
        assert!((field.creation[k] - s * chi.value(&m.momentum())).norm() < 1e-14);
        // forward-cone support: nothing at −p
        assert_eq!(field.annihilation[k], c(0.0, 0.0));
    }
}

#[test]
fn spectral_projectors_are_idempotent_and_complementary() {
    let (_, b) = small();
    let p = spectral_projector(&b, |p| p.x0 <= 2.5);
    let e = p.to_matrix();
    assert!(e.mul(&e).max_abs_diff(&e) < 1e-15);
    assert!(e.add(&p.complement().to_matrix()).max_abs_diff(&OperatorMatrix::identity(b.dim())) < 1e-15);
    let q = shell_projector(&b, 1.0, 1e-9);
    assert_eq!(p.intersect(&q).rank(), q.rank());
    // the shell at μ → 0 is exactly the one-particle layer
    assert!((0..b.dim()).all(|i| q.mask[i] == (b.particle_number(i) == 1)));
    assert_eq!(vacuum_complement(&b).rank(), b.dim() - 1);
}

#[test]
fn truncation_beyond_the_dimension_limit_is_refused() {
    let g = ModeGrid::new(1.0, 0.25, 1.0).unwrap();
    assert!(matches!(FockBasis::new(&g, 3, 5000), Err(hyperlab::Error::DimensionOverflow { .. })));
    assert!(ModeGrid::new(-1.0, 0.25, 1.0).is_err());
}

#[test]
fn jordan_blocks_saturate_the_kernel_bound() {
    for n in 2..6 {
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = c(1.0, 0.0);
        }
        let r = kernel_projector_lemma_check(&a, n, None).unwrap();
        assert_eq!(r.kernel_dim, n);
        assert!(r.satisfied);
        if n == 2 {
            assert!((r.lhs1 - r.rhs1).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn kernel_bound_holds_for_nilpotent_blocks(
        entries in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 36),
        diag in proptest::collection::vec(0.5f64..2.0, 2),
        n in 1usize..5,
    ) {
        // strictly upper 4×4 block (nilpotent) plus an invertible 2×2 block
        let mut a = DMatrix::<Complex64>::zeros(6, 6);
        for i in 0..4 {
            for j in i + 1..4 {
                let (re, im) = entries[i * 6 + j];
                a[(i, j)] = c(re, im);
            }
        }
        a[(4, 4)] = c(diag[0], 0.0);
        a[(5, 5)] = c(0.0, diag[1]);
        a[(4, 5)] = c(entries[30].0, entries[30].1);
        match kernel_projector_lemma_check(&a, n, None) {
            Ok(r) => prop_assert!(r.satisfied, "{:?}", r),
            Err(hyperlab::Error::AmbiguousRank { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
