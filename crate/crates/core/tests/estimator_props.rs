use num_complex::Complex64 as C;
use proptest::prelude::*;
use serde_json::json;

use pell_core::coefficients::{carleson_density, carleson_norm, make_field, CarlesonKind, FieldSpec};
use pell_core::estimators::{homogenized, lq_norm, ntmax, square_function, BoundaryFunction, FunctionalKind};
use pell_core::geometry::{build_strip, dyadic_tents, ConeGeometry};
use pell_core::solver::SolutionField;

fn sample_field(a: f64, b: f64) -> impl Fn([f64; 3]) -> C {
    move |x: [f64; 3]| {
        let t = std::f64::consts::TAU * x[1];
        C::new((1.0 - x[0]) * (a * t.cos() + 1.0), (1.0 - x[0]).powi(2) * b * t.sin())
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn homogenized_square_function_is_degree_one(p in 1.5f64..4.0, cr in -3.0f64..3.0, ci in 0.5f64..3.0, a in 0.1f64..0.9) {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let u = SolutionField::from_fn(&d, sample_field(a, 0.5));
        let c = C::new(cr, ci);
        let cone = ConeGeometry::full(1.0);
        let s = homogenized(&square_function(&u, p, &cone));
        let sc = homogenized(&square_function(&u.scaled(c), p, &cone));
        for (x, y) in s.values.iter().zip(&sc.values) {
            prop_assert!((y - c.norm() * x).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn maximal_function_is_degree_one(p in 1.5f64..4.0, cr in -3.0f64..3.0, ci in 0.5f64..3.0) {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let u = SolutionField::from_fn(&d, sample_field(0.5, 1.0));
        let c = C::new(cr, ci);
        let cone = ConeGeometry::full(2.0);
        let n = ntmax(&u, p, &cone);
        let nc = ntmax(&u.scaled(c), p, &cone);
        for (x, y) in n.averaged.values.iter().zip(&nc.averaged.values) {
            prop_assert!((y - c.norm() * x).abs() <= 1e-10 * (1.0 + y.abs()));
        }
        // the averaged maximal function dominates the boundary modulus
        for (lat, v) in n.averaged.values.iter().enumerate() {
            prop_assert!(*v >= u.at(0, lat).norm() - 1e-12);
        }
    }

    #[test]
    fn lq_norm_of_constants(v in 0.1f64..5.0, q in 0.5f64..6.0, cells in 4usize..17) {
        let period = cells as f64 / 8.0;
        let d = build_strip(2, 1.0, 1.0 / 8.0, period).unwrap();
        let bf = BoundaryFunction {
            kind: FunctionalKind::NtMax,
            p: 2.0,
            aperture: 1.0,
            truncation: None,
            values: vec![v; d.n_lateral()],
        };
        let expected = v * period.powf(1.0 / q);
        prop_assert!((lq_norm(&bf, &d, q) - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn carleson_norm_is_linear_in_the_density(c in 0.1f64..10.0, amp in 0.05f64..0.5) {
        let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
        let spec: FieldSpec = serde_json::from_value(json!({
            "kind": "block", "lateral": [[[1, 0.5]]], "amplitude": amp, "mode": 1
        })).unwrap();
        let field = make_field(&d, &spec).unwrap();
        let tents = dyadic_tents(&d, 4);
        let dens = carleson_density(&field, &d, CarlesonKind::Mu);
        let n1 = carleson_norm(&dens, &d, &tents).norm;
        let n2 = carleson_norm(&dens.scaled(c), &d, &tents).norm;
        prop_assert!(n1 > 0.0);
        prop_assert!((n2 - c * n1).abs() < 1e-10 * n2);
    }
}

#[test]
fn constant_coefficients_have_no_carleson_mass() {
    let d = build_strip(2, 1.0, 1.0 / 16.0, 1.0).unwrap();
    let spec: FieldSpec =
        serde_json::from_value(json!({"kind": "constant", "a": [[[1, 1], [0, 0]], [[0, 0], [1, 1]]]})).unwrap();
    let field = make_field(&d, &spec).unwrap();
    let tents = dyadic_tents(&d, 4);
    for kind in [CarlesonKind::Mu, CarlesonKind::MuPrime] {
        assert_eq!(carleson_norm(&carleson_density(&field, &d, kind), &d, &tents).norm, 0.0);
    }
}
