use nalgebra::DMatrix;
use proptest::prelude::*;

use hypermode::degeneracy::{gnl_indicator, ModeField};
use hypermode::reduction::{reduce_linear, reduce_quasisemilinear};
use hypermode::spectral::{dispersion_roots, Tolerances};
use hypermode::systems::specfile::{parse_system, print_system};
use hypermode::systems::{random_hyperbolic_constant, random_qsl, sample_directions};
use hypermode::{
    builtin_model, Direction, FirstOrderSystem, PolyMatrixFn, Polynomial, SecondOrderSystem, System,
    Term,
};

fn term(nvars: usize) -> impl Strategy<Value = Term> {
    (
        prop_oneof![-5.0..-0.01f64, 0.01..5.0f64],
        prop::collection::vec(0u32..3, nvars),
    )
        .prop_map(|(coeff, powers)| Term { coeff, powers })
}

fn polynomial(nvars: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(term(nvars), 0..4).prop_map(|terms| Polynomial { terms })
}

fn poly_matrix(rows: usize, cols: usize, nvars: usize) -> impl Strategy<Value = PolyMatrixFn> {
    prop::collection::vec(polynomial(nvars), rows * cols)
        .prop_map(move |entries| PolyMatrixFn::new(rows, cols, nvars, entries).unwrap())
}

fn second_order() -> impl Strategy<Value = SecondOrderSystem> {
    (1usize..=2, 1usize..=2).prop_flat_map(|(n, d)| {
        (
            poly_matrix(n, n, n),
            prop::collection::vec(poly_matrix(n, n, n), d),
            prop::collection::vec(poly_matrix(n, n, n), d * d),
            poly_matrix(n, 1, (d + 2) * n),
        )
            .prop_map(move |(b00, c, b, h)| SecondOrderSystem::new(n, d, b00, c, b, Some(h)).unwrap())
    })
}

fn first_order() -> impl Strategy<Value = FirstOrderSystem> {
    (1usize..=3, 1usize..=2).prop_flat_map(|(m, d)| {
        (
            poly_matrix(m, m, m),
            prop::collection::vec(poly_matrix(m, m, m), d),
            poly_matrix(m, 1, m),
        )
            .prop_map(move |(a0, a, g)| FirstOrderSystem::new(m, d, a0, a, Some(g)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spec_files_round_trip(sys in prop_oneof![
        second_order().prop_map(System::SecondOrder),
        first_order().prop_map(System::FirstOrder),
    ]) {
        let text = print_system(&sys);
        prop_assert_eq!(parse_system(&text).unwrap(), sys);
    }

    #[test]
    fn evaluation_is_linear(
        (f, g, states) in (1usize..=3).prop_flat_map(|nv| (
            poly_matrix(2, 3, nv),
            poly_matrix(2, 3, nv),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, nv), 100),
        ))
    ) {
        let sum = f.add(&g).unwrap();
        for s in &states {
            let lhs = sum.eval(s).unwrap();
            let rhs = f.eval(s).unwrap() + g.eval(s).unwrap();
            prop_assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
        }
    }

    #[test]
    fn roots_negate_with_the_direction(seed in 0u64..500, n in 1usize..=3, d in 1usize..=3, k in 0usize..8) {
        let sos = random_hyperbolic_constant(seed, n, d).unwrap();
        let tol = Tolerances::default();
        let xi = sample_directions(d, 8)[k % sample_directions(d, 8).len()].clone();
        let u = vec![0.0; n];
        let plus: Vec<_> = dispersion_roots(&sos, &u, &xi, &tol).unwrap();
        let mut minus: Vec<_> = dispersion_roots(&sos, &u, &xi.negated(), &tol).unwrap();
        minus.reverse();
        prop_assert_eq!(plus.len(), minus.len());
        for (p, m) in plus.iter().zip(&minus) {
            prop_assert_eq!(p.multiplicity, m.multiplicity);
            prop_assert!((p.value + m.value).abs() <= 1e-10 * (1.0 + p.value.abs()));
        }
    }

    #[test]
    fn quasisemilinear_reduction_freezes_to_the_linear_one(
        seed in 0u64..50,
        ext in prop::collection::vec(-0.5..0.5f64, 8),
    ) {
        let sos = random_qsl(seed).unwrap();
        let (n, d) = (sos.n(), sos.d());
        let (fos, map) = reduce_quasisemilinear(&sos).unwrap();
        let core = (d + 1) * n;
        prop_assert_eq!(map.m, core + n);
        let u = &ext[core..];
        let frozen = reduce_linear(&sos, u).unwrap();
        let zeros = vec![0.0; core];
        let a0 = fos.a0_at(&ext).unwrap();
        prop_assert_eq!(a0.view((0, 0), (core, core)).into_owned(), frozen.a0_at(&zeros).unwrap());
        prop_assert_eq!(a0.view((core, core), (n, n)).into_owned(), DMatrix::identity(n, n));
        for k in 0..d {
            let xi = Direction::axis(d, k);
            let a = fos.a_of(&ext, &xi).unwrap();
            prop_assert_eq!(a.view((0, 0), (core, core)).into_owned(), frozen.a_of(&zeros, &xi).unwrap());
            // U has no spatial transport and does not enter the other rows
            prop_assert!(a.view((core, 0), (n, core + n)).amax() == 0.0);
            prop_assert!(a.view((0, core), (core, n)).amax() == 0.0);
        }
    }

    #[test]
    fn indicator_is_invariant_under_rescaling(
        v in (-1.0..1.0f64, -1.0..1.0f64),
        factor in prop_oneof![0.1..0.9f64, 1.5..20.0f64],
        idx in 0usize..2,
    ) {
        let System::FirstOrder(p) = builtin_model("p-system", 0).unwrap() else { unreachable!() };
        let scaled = p.scaled(factor);
        let v = vec![v.0, v.1];
        let tol = Tolerances::default();
        let xi = Direction::axis(1, 0);
        let g = |fos: &FirstOrderSystem| {
            let field = ModeField::new(fos, xi.clone(), idx, v.clone(), 1e-2, tol).unwrap();
            gnl_indicator(&field, &v).unwrap().value
        };
        prop_assert!((g(&p) - g(&scaled)).abs() <= 1e-8);
    }
}
