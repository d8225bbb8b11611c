//! Property tests for the structural invariants of each module.

use coadj_core::circlefield::{CircleDiffeo, CircleField, FieldConfig};
use coadj_core::diffpoly::{self, DiffPoly, Direction};
use coadj_core::dirac::{self, CanonicalPairSet};
use coadj_core::dynamics::{self, PhasePoint, ReducedSystem};
use coadj_core::schwarzian;
use coadj_core::testfields as tf;
use coadj_core::valgebra::{self, VirAdjoint, VirCoadjoint, Virasoro};
use coadj_core::wilson::{self, Operator, WilsonConfig};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn adj(r: &mut tf::TestRng) -> VirAdjoint {
    use rand::Rng;
    VirAdjoint { xi: tf::random_field(r, 5, 1.0, 12), a: r.gen_range(-1.0..1.0) }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn leibniz_on_fields(seed in any::<u64>()) {
        let mut r = tf::rng(seed);
        let f = tf::random_field(&mut r, 6, 1.0, 16);
        let g = tf::random_field(&mut r, 6, 1.0, 16);
        let lhs = f.mul(&g).derivative(1);
        let rhs = &f.derivative(1).mul(&g) + &f.mul(&g.derivative(1));
        prop_assert!((&lhs - &rhs).sup_norm() < 1e-11);
    }

    #[test]
    fn bracket_is_antisymmetric_and_jacobi(seed in any::<u64>()) {
        let mut r = tf::rng(seed);
        let vir = Virasoro::default();
        let (x, y, z) = (adj(&mut r), adj(&mut r), adj(&mut r));
        let xy = vir.bracket(&x, &y);
        let yx = vir.bracket(&y, &x);
        prop_assert!((&xy.xi + &yx.xi).sup_norm() < 1e-12);
        prop_assert!((xy.a + yx.a).abs() < 1e-12);
        let j = &(&vir.bracket(&x, &yz(&vir, &y, &z)).xi + &vir.bracket(&y, &yz(&vir, &z, &x)).xi)
            + &vir.bracket(&z, &yz(&vir, &x, &y)).xi;
        prop_assert!(j.sup_norm() < 1e-9);
    }

    #[test]
    fn pairing_is_infinitesimally_invariant(seed in any::<u64>(), charge in -3.0f64..3.0) {
        let mut r = tf::rng(seed);
        let vir = Virasoro::default();
        let b = VirCoadjoint::new(tf::random_field(&mut r, 5, 1.0, 12), charge);
        let (x, y) = (adj(&mut r), adj(&mut r));
        let du = VirCoadjoint::new(vir.coadjoint_infinitesimal(&b, &x).u, 0.0);
        let res = valgebra::pairing(&du, &y) + valgebra::pairing(&b, &vir.bracket(&x, &y));
        prop_assert!(res.abs() < 1e-10);
    }

    #[test]
    fn cocycle_is_antisymmetric(seed in any::<u64>()) {
        let mut r = tf::rng(seed);
        let f = tf::random_field(&mut r, 6, 1.0, 16);
        let g = tf::random_field(&mut r, 6, 1.0, 16);
        prop_assert!((valgebra::gf_cocycle(&f, &g) + valgebra::gf_cocycle(&g, &f)).abs() < 1e-12);
        prop_assert_eq!(valgebra::gf_cocycle(&f, &f), 0.0);
    }

    #[test]
    fn schwarzian_composition(seed in any::<u64>()) {
        let mut r = tf::rng(seed);
        let fc = FieldConfig::default();
        let g = tf::random_diffeo(&mut r, 4, 0.3, 16);
        let f = tf::random_diffeo(&mut r, 4, 0.3, 16);
        prop_assert!(schwarzian::composition_residual(&g, &f, &fc).unwrap() < 1e-8);
    }

    #[test]
    fn rotations_have_no_schwarzian(a in -3.0f64..3.0) {
        let s = schwarzian::schwarzian(&CircleDiffeo::rotation(a, 8), &FieldConfig::default()).unwrap();
        prop_assert!(s.sup_norm() < 1e-12);
    }

    #[test]
    fn finite_action_preserves_pairing(seed in any::<u64>()) {
        use rand::Rng;
        let mut r = tf::rng(seed);
        let fc = FieldConfig::default();
        let b = VirCoadjoint::new(tf::random_field(&mut r, 4, 1.0, 12), r.gen_range(-2.0..2.0));
        let x = adj(&mut r);
        let f = tf::random_diffeo(&mut r, 3, 0.3, 12);
        let bf = valgebra::coadjoint_active(&b, &f, &fc).unwrap();
        let xf = valgebra::adjoint_action(&x, &f, &fc).unwrap();
        prop_assert!((valgebra::pairing(&bf, &xf) - valgebra::pairing(&b, &x)).abs() < 1e-8);
    }

    #[test]
    fn monodromy_is_unimodular(seed in any::<u64>(), q in 0.5f64..1.5) {
        let mut r = tf::rng(seed);
        let d = tf::random_field(&mut r, 4, 0.8, 8);
        for op in [Operator::Hill, Operator::Nabla3] {
            let m = wilson::monodromy(op, &d, q, &WilsonConfig::default()).unwrap();
            let norm = m.to_matrix().abs().max();
            let err = (m.det() - 1.0).abs();
            // Entries good to a few ulps put det − 1 at about eps‖M‖²; below
            // ‖M‖ ≈ 5e3 that floor sits under 1e-8.
            let floor = 4.0 * f64::EPSILON * norm * norm;
            if norm < 5e3 {
                prop_assert!(err < 1e-8, "{:?}: det = {}", op, m.det());
            }
            prop_assert!(err < 1e-8f64.max(floor), "{:?}: det = {}, |M| = {}", op, m.det(), norm);
        }
    }

    #[test]
    fn closed_form_monodromy_matches_ode(omega in 0.1f64..3.5, q in 0.3f64..2.0) {
        prop_assume!((omega - omega.round()).abs() > 1e-6);
        let ode = wilson::monodromy_nabla3(&CircleField::constant(omega * omega * q / 2.0, 2), q, &WilsonConfig::default())
            .unwrap();
        prop_assert!(ode.distance(&wilson::first_type_closed_form(omega).unwrap()) < 1e-7);
    }

    #[test]
    fn reduced_energy_is_conserved(q0 in 0.2f64..0.8, p0 in -0.3f64..0.3) {
        let sys = ReducedSystem::default();
        // Some starts legitimately run into the Q = 0 guard.
        match dynamics::integrate_reduced(PhasePoint { q: q0, p: p0 }, &sys, 0.5, 0.01) {
            Ok(tr) => prop_assert!(tr.relative_h_drift() < 1e-8),
            Err(e) => prop_assert!(matches!(e, dynamics::DynamicsError::Singularity { .. }), "{}", e),
        }
    }

    #[test]
    fn omega_is_positive_off_the_singular_points(q in 0.01f64..20.0) {
        prop_assume!((q - 1.0).abs() > 1e-2);
        let sys = ReducedSystem::default();
        let w = sys.omega(q);
        prop_assert!(w.is_finite() && w > 0.0);
    }
}

fn yz(vir: &Virasoro, y: &VirAdjoint, z: &VirAdjoint) -> VirAdjoint {
    vir.bracket(y, z)
}

// ---------------------------------------------------------------------------
// Symbolic invariants

fn atom() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["D", "D'", "D''", "X", "X'", "X''"])
}

fn poly(smearing: &'static str) -> impl Strategy<Value = DiffPoly> {
    prop::collection::vec((-3i64..=3, prop::collection::vec(atom(), 1..3)), 1..3).prop_map(move |terms| {
        let src: Vec<String> = terms.iter().map(|(c, atoms)| format!("{c}*{smearing}*{}", atoms.join("*"))).collect();
        diffpoly::parse(&src.join(" + "), &[]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn total_derivative_is_a_derivation(f in poly("mu"), g in poly("lam")) {
        let d = |p: &DiffPoly| diffpoly::total_derivative(p, Direction::X).unwrap();
        prop_assert_eq!(d(&f.mul(&g)), d(&f).mul(&g).add(&f.mul(&d(&g))));
        prop_assert_eq!(d(&f.add(&g)), d(&f).add(&d(&g)));
    }

    #[test]
    fn poisson_bracket_is_antisymmetric(f in poly("mu"), g in poly("lam")) {
        let pairs = CanonicalPairSet::new(&[("D", "X")]).unwrap();
        let fg = dirac::bracket_densities(&f, &g, &pairs, &["mu", "lam"]).unwrap();
        let gf = dirac::bracket_densities(&g, &f, &pairs, &["mu", "lam"]).unwrap();
        prop_assert!(fg.add(&gf).normal_form(true).is_zero());
    }

    #[test]
    fn poisson_bracket_satisfies_jacobi(f in poly("mu"), g in poly("lam"), h in poly("nu")) {
        let pairs = CanonicalPairSet::new(&[("D", "X")]).unwrap();
        let j = dirac::jacobi_residual(&f, &g, &h, &pairs, &["mu", "lam", "nu"]).unwrap();
        prop_assert!(j.normal_form(true).is_zero(), "{}", j);
    }
}

#[test]
fn z_has_a_triple_zero_at_one() {
    let sys = ReducedSystem::default();
    let jet = dynamics::reduced_facts(&sys).z_jet_at_one;
    assert!(jet[..3].iter().all(|v| v.abs() < 1e-12));
    assert!(jet[3].abs() > 1e-3);
}
