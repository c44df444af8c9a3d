use proptest::prelude::*;

use pell_core::geometry::build_strip;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn node_volumes_tile_the_strip(hk in 2usize..17, k in 3u32..6, cells in 1usize..3, n in 2usize..4, grading in 0usize..4) {
        let h = hk as f64 * 0.25;
        let mesh = 0.5f64.powi(k as i32);
        let period = cells as f64 * 0.5;
        let d = build_strip(n, h, mesh, period).unwrap().with_grading(grading).unwrap();
        let total: f64 = (0..d.n_layers()).map(|l| d.node_volume(l) * d.n_lateral() as f64).sum();
        let expected = h * period.powi(n as i32 - 1);
        prop_assert!((total - expected).abs() < 1e-9 * expected, "{total} vs {expected}");
    }

    #[test]
    fn periodic_displacement_is_minimal(x in 0.0f64..1.0, y in 0.0f64..1.0, cells in 8usize..33) {
        let period = cells as f64 / 16.0;
        let d = build_strip(2, 1.0, 1.0 / 16.0, period).unwrap();
        let [dx, _] = d.periodic_disp([x * period, 0.0], [y * period, 0.0]);
        prop_assert!(dx.abs() <= 0.5 * period + 1e-12);
        let shift = (x - y) * period - dx;
        prop_assert!((shift / period - (shift / period).round()).abs() < 1e-9);
    }
}
