use nalgebra::DVector;
use proptest::prelude::*;
use solvctrl::catalog;
use solvctrl::dynamics::ControlLaw;
use solvctrl::NilGroup;

fn vec3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.5f64..1.5, 3).prop_map(DVector::from_vec)
}

fn vec4() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4).prop_map(DVector::from_vec)
}

fn filiform() -> NilGroup {
    NilGroup::new(catalog::filiform_algebra()).unwrap()
}

proptest! {
    #[test]
    fn product_is_associative(x in vec4(), y in vec4(), z in vec4()) {
        let g = filiform();
        let l = g.product(&g.product(&x, &y), &z);
        let r = g.product(&x, &g.product(&y, &z));
        prop_assert!((l - r).norm() <= 1e-10);
    }

    #[test]
    fn inverse_cancels(x in vec4()) {
        let g = filiform();
        prop_assert!(g.product(&x, &g.inverse(&x)).norm() <= 1e-12);
        prop_assert!(g.product(&g.inverse(&x), &x).norm() <= 1e-12);
    }

    #[test]
    fn heisenberg_product_matches_closed_form(x in vec3(), y in vec3()) {
        let g = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        let p = g.product(&x, &y);
        let z = x[2] + y[2] + 0.5 * (x[0] * y[1] - x[1] * y[0]);
        prop_assert!((p[0] - x[0] - y[0]).abs() < 1e-14);
        prop_assert!((p[2] - z).abs() < 1e-14);
    }

    #[test]
    fn f_phi_round_trip(u in -1.0f64..1.0, w in -1.0f64..1.0, t in 0.2f64..1.5, y in vec3()) {
        let sys = catalog::heisenberg3();
        let law = ControlLaw::constant(vec![u, w], t).unwrap();
        let phi = sys.flow_b(&law).unwrap();
        let x = sys.group().f_phi_invert(&phi, &y).unwrap();
        prop_assert!((sys.group().f_phi_apply(&phi, &x) - &y).norm() <= 1e-9 * (1.0 + y.norm()));
    }
}
