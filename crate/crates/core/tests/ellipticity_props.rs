use num_complex::Complex64 as C;
use proptest::prelude::*;

use pell_core::ellipticity::{conjugate_exponent, delta_p, p_range, ComplexMatrix, SphereSearch};

fn search() -> SphereSearch {
    SphereSearch {
        samples: 2_000,
        ..SphereSearch::default()
    }
}

prop_compose! {
    fn elliptic2()(re in prop::array::uniform4(-0.4f64..0.4), im in prop::array::uniform4(-1.0f64..1.0)) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| {
            let k = 2 * i + j;
            C::new(re[k] + if i == j { 1.5 } else { 0.0 }, im[k])
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn delta_p_is_positively_homogeneous(a in elliptic2(), c in 0.2f64..5.0, p in 1.2f64..6.0) {
        let s = search();
        let d = delta_p(&a, p, &s).unwrap();
        let dc = delta_p(&a.scale(C::new(c, 0.0)), p, &s).unwrap();
        prop_assert!((dc - c * d).abs() <= 1e-7 * (1.0 + c * d.abs()), "{dc} vs {}", c * d);
    }

    #[test]
    fn delta_p_is_symmetric_under_conjugation(a in elliptic2(), p in 1.2f64..6.0) {
        let s = search();
        let d = delta_p(&a, p, &s).unwrap();
        let dq = delta_p(&a, conjugate_exponent(p), &s).unwrap();
        prop_assert!((d - dq).abs() <= 1e-7 * (1.0 + d.abs()), "{d} vs {dq}");
    }

    #[test]
    fn p_range_endpoints_are_conjugate(a in elliptic2()) {
        let r = p_range(&a, &search()).unwrap();
        prop_assert!(r.p0 >= 1.0 && r.p0 <= 2.0);
        match r.p0_prime {
            Some(q) => prop_assert!((q - conjugate_exponent(r.p0)).abs() <= 1e-9 * q),
            None => prop_assert!((r.p0 - 1.0).abs() < 1e-12),
        }
    }

    #[test]
    fn delta_2_is_the_hermitian_lower_bound(a in elliptic2()) {
        // J_2 xi = xi / 2, so the minimum is half the smallest eigenvalue
        // of the Hermitian part (A + A*)/2
        let s = search();
        let d = delta_p(&a, 2.0, &s).unwrap();
        let h11 = a.get(0, 0).re;
        let h22 = a.get(1, 1).re;
        let h12 = 0.5 * (a.get(0, 1) + a.get(1, 0).conj());
        let lmin = 0.5 * (h11 + h22) - (0.25 * (h11 - h22).powi(2) + h12.norm_sqr()).sqrt();
        prop_assert!((d - 0.5 * lmin).abs() < 1e-7, "{d} vs {}", 0.5 * lmin);
    }
}
