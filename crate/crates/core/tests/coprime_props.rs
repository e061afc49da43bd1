use num_complex::Complex64;
use platoon_core::coprime::{platoon_dcf, scalar_dcf, shift_dcf, verify_bezout};
use platoon_core::platoon_model::PlatoonConfig;
use platoon_core::tf_core::freq::check_grid;
use platoon_core::tf_core::{Polynomial, RationalFn, TfMatrix};
use proptest::prelude::*;

/// Strictly proper plant of order 1..=4 with poles anywhere in a modest
/// disc (unstable ones included) and numerator roots kept away from them.
fn plant() -> impl Strategy<Value = RationalFn> {
    (1usize..=4)
        .prop_flat_map(|order| {
            (
                prop::collection::vec(-3.0f64..3.0, order),
                prop::collection::vec(-3.0f64..3.0, 0..order),
                0.5f64..2.0,
            )
        })
        .prop_filter_map("num roots too close to poles", |(poles, zeros, gain)| {
            let p: Vec<Complex64> = poles.iter().map(|&a| Complex64::new(a, 0.0)).collect();
            let z: Vec<Complex64> = zeros.iter().map(|&a| Complex64::new(a, 0.0)).collect();
            if z.iter().any(|zi| p.iter().any(|pi| (zi - pi).norm() < 0.2)) {
                return None;
            }
            RationalFn::new(Polynomial::from_roots(&z).scale(gain), Polynomial::from_roots(&p)).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, .. ProptestConfig::default() })]

    #[test]
    fn random_plants_factor(g in plant()) {
        let d = scalar_dcf(&g, 1.0).unwrap();
        prop_assert!(verify_bezout(&d) < 1e-8);
        prop_assert!(d.n.is_strictly_proper());
        for f in [&d.m, &d.n, &d.x, &d.y] {
            prop_assert!(f.is_stable());
        }
    }

    #[test]
    fn shift_and_unshift(a in 0.2f64..5.0, b in 0.2f64..5.0, k in -3.0f64..3.0, h in 0.0f64..1.0) {
        let cfg = PlatoonConfig::reference_string(3, h, false, 3).unwrap();
        let s = scalar_dcf(&cfg.base_plant_g_wp, 1.0).unwrap();
        let d = platoon_dcf(&cfg, &s).unwrap();
        let q = TfMatrix::diag(&[
            RationalFn::first_order_lag(1.0, a).unwrap().scale(k),
            RationalFn::constant(k),
            RationalFn::first_order_lag(1.0, b).unwrap(),
        ]);
        let sh = shift_dcf(&d, &q).unwrap();
        prop_assert!(verify_bezout(&sh) < 1e-8);
        let back = shift_dcf(&sh, &q.neg()).unwrap();
        let grid = check_grid();
        for (x, y) in [(&back.x, &d.x), (&back.y, &d.y), (&back.x_t, &d.x_t), (&back.y_t, &d.y_t)] {
            prop_assert!(x.max_abs_diff_on_grid(y, &grid) < 1e-8);
        }
    }
}
