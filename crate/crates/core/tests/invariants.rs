use proptest::prelude::*;

use spdhg_core::analysis::{theorem_bound, BoundParams};
use spdhg_core::linalg;
use spdhg_core::problem::{DualSet, PrimalSet};
use spdhg_core::projections::{
    dual_step_objective, dual_update, project_box, project_l2_ball, project_linf_ball,
};
use spdhg_core::solvers::{averaging_weight, step_size, Regime};

fn vec_of(len: usize, mag: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-mag..mag, len)
}

fn pair(mag: f64) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(move |d| (vec_of(d, mag), vec_of(d, mag)))
}

fn dot_diff(a: &[f64], b: &[f64], c: &[f64], e: &[f64]) -> f64 {
    a.iter().zip(b).zip(c.iter().zip(e)).map(|((a, b), (c, e))| (a - b) * (c - e)).sum()
}

proptest! {
    #[test]
    fn l2_projection_properties((u, v) in pair(10.0), r in 0.1f64..5.0) {
        let pu = project_l2_ball(&u, r);
        let pv = project_l2_ball(&v, r);
        prop_assert!(linalg::norm(&pu) <= r);
        prop_assert_eq!(project_l2_ball(&pu, r), pu.clone());
        prop_assert!(linalg::distance(&pu, &pv) <= linalg::distance(&u, &v) + 1e-12);
        // pv is feasible, so it serves as the test point z
        prop_assert!(dot_diff(&u, &pu, &pv, &pu) <= 1e-9);
    }

    #[test]
    fn linf_projection_properties((u, v) in pair(10.0), r in 0.1f64..5.0) {
        let pu = project_linf_ball(&u, r);
        let pv = project_linf_ball(&v, r);
        prop_assert_eq!(project_linf_ball(&pu, r), pu.clone());
        prop_assert!(linalg::distance(&pu, &pv) <= linalg::distance(&u, &v) + 1e-12);
        prop_assert!(dot_diff(&u, &pu, &pv, &pu) <= 1e-9);
    }

    #[test]
    fn box_projection_properties((u, v) in pair(10.0), lo in -3.0f64..0.0, width in 0.1f64..4.0) {
        let d = u.len();
        let (lo, hi) = (vec![lo; d], vec![lo + width; d]);
        let pu = project_box(&u, &lo, &hi).unwrap();
        let pv = project_box(&v, &lo, &hi).unwrap();
        prop_assert_eq!(project_box(&pu, &lo, &hi).unwrap(), pu.clone());
        prop_assert!(linalg::distance(&pu, &pv) <= linalg::distance(&u, &v) + 1e-12);
        prop_assert!(dot_diff(&u, &pu, &pv, &pu) <= 1e-9);
        let set = PrimalSet::Box { lo, hi };
        prop_assert!(set.contains(&pu, 0.0));
    }

    #[test]
    fn dual_update_beats_feasible_points(
        (y0, fx) in pair(3.0),
        s in 0.01f64..100.0,
        r in 0.1f64..2.0,
        probes in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 8), 50),
        l2 in any::<bool>(),
    ) {
        let set = if l2 { DualSet::L2Ball { radius: r } } else { DualSet::LinfBall { radius: r } };
        let y_prev = set.project(&y0);
        let y = dual_update(&y_prev, &fx, s, &set).unwrap();
        prop_assert!(set.contains(&y, 1e-12));
        let best = dual_step_objective(&y, &y_prev, &fx, s);
        for p in probes {
            let z = set.project(&p[..fx.len()].iter().map(|v| v * r).collect::<Vec<_>>());
            prop_assert!(dual_step_objective(&z, &y_prev, &fx, s) <= best + 1e-9);
        }
    }

    #[test]
    fn schedules_decrease(k in 0usize..1_000_000, l in 0.0f64..100.0, mu in 1e-3f64..10.0) {
        for regime in Regime::ALL {
            let a = step_size(regime, k, l, mu).unwrap();
            let b = step_size(regime, k + 1, l, mu).unwrap();
            prop_assert!(a > 0.0 && b < a);
        }
    }

    #[test]
    fn weights_sum_to_one(t in 0usize..3000) {
        for regime in Regime::ALL {
            let total: f64 = (0..=t).map(|k| averaging_weight(regime, k, t).unwrap()).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn bound_grows_with_sigma(sigma in 0.0f64..5.0, extra in 0.01f64..1.0, t in 10usize..100_000) {
        for regime in Regime::ALL {
            let p = BoundParams { d_x: 2.0, d_y: 1.0, sigma, lipschitz: 1.0, mu: 0.1, lambda_max: 4.0, s: 1.0 };
            let q = BoundParams { sigma: sigma + extra, ..p };
            prop_assert!(theorem_bound(regime, &q, t, 1.0).unwrap() > theorem_bound(regime, &p, t, 1.0).unwrap());
        }
    }
}
