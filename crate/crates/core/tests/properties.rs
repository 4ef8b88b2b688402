#![cfg(not(feature = "mutate-ga"))]

use proptest::prelude::*;

use ruin2d_core::closedform::{adjustment_coefficient, classify_regime, dominating_points, Regime};
use ruin2d_core::model::{critical_values, f1, f2, w1, ModelParams};
use ruin2d_core::objective::{g1, g2, g_a, g_b, g_closed, g_l, g_qp};
use ruin2d_core::qp::{kkt_residual, solve_qp, validating_sets, CovarianceMatrix};

fn params() -> impl Strategy<Value = ModelParams> {
    (0.2f64..5.0, 1.0f64..10.0, -0.95f64..0.95)
        .prop_map(|(mu1, ratio, rho)| ModelParams::new(mu1, mu1 * ratio, rho).unwrap())
}

fn time() -> impl Strategy<Value = f64> {
    (0.05f64.ln()..20.0f64.ln()).prop_map(f64::exp)
}

fn pd_matrix() -> impl Strategy<Value = CovarianceMatrix> {
    (0.1f64..10.0, 0.1f64..10.0, -0.95f64..0.95)
        .prop_map(|(a, d, c)| CovarianceMatrix::new(a, c * (a * d).sqrt(), d).unwrap())
}

fn feasible_b() -> impl Strategy<Value = [f64; 2]> {
    (-2.0f64..2.0, -2.0f64..2.0)
        .prop_filter("some positive component", |(x, y)| *x > 0.0 || *y > 0.0)
        .prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn thresholds_are_ordered(p in params()) {
        let cv = critical_values(&p);
        prop_assert!(0.0 <= cv.rho_hat_1);
        prop_assert!(cv.rho_hat_1 <= cv.rho_hat_2 + 1e-15);
        prop_assert!(cv.rho_hat_2 <= 1.0);
        prop_assert!(cv.rho_hat <= 1.0);
        prop_assert!(p.mu1() / p.mu2() <= cv.rho_hat_2);
    }

    #[test]
    fn qp_contract_holds(m in pd_matrix(), b in feasible_b()) {
        let sol = solve_qp(&m, b).unwrap();
        prop_assert_eq!(validating_sets(&m, b).unwrap().len(), 1);
        prop_assert!(sol.solution[0] >= b[0] - 1e-12 * b[0].abs().max(1.0));
        prop_assert!(sol.solution[1] >= b[1] - 1e-12 * b[1].abs().max(1.0));
        prop_assert!(kkt_residual(&m, b, &sol) < 1e-10);
        // Any feasible point does at least as well as nothing.
        let corner = [b[0].max(0.0), b[1].max(0.0)];
        prop_assert!(sol.value <= m.quad_inv(corner) * (1.0 + 1e-12));
    }

    #[test]
    fn qp_value_scales_inversely_with_the_matrix(m in pd_matrix(), b in feasible_b(), c in 0.1f64..10.0) {
        let v = solve_qp(&m, b).unwrap().value;
        let vc = solve_qp(&m.scaled(c).unwrap(), b).unwrap().value;
        prop_assert!((vc * c - v).abs() <= 1e-10 * v);
    }

    #[test]
    fn qp_and_closed_form_agree(p in params(), t in time(), s in time()) {
        let q = g_qp(&p, t, s).unwrap();
        let c = g_closed(&p, t, s).unwrap().value;
        prop_assert!((q - c).abs() <= 1e-9 * q, "qp {} closed {}", q, c);
    }

    #[test]
    fn g_dominates_each_single_constraint(p in params(), t in time(), s in time()) {
        let g = g_qp(&p, t, s).unwrap();
        prop_assert!(g >= g1(&p, t) * (1.0 - 1e-12));
        prop_assert!(g >= g2(&p, s) * (1.0 - 1e-12));
    }

    #[test]
    fn pieces_meet_on_the_diagonal(p in params(), x in time()) {
        let l = g_l(&p, x);
        prop_assert!((g_a(&p, x, x) - l).abs() <= 1e-12 * l);
        prop_assert!((g_b(&p, x, x) - l).abs() <= 1e-12 * l);
    }

    #[test]
    fn boundary_curves_stay_in_the_quadrant(p in params(), s in time()) {
        prop_assert!(f2(&p, s) < s || p.rho() <= 0.0);
        if p.has_d2() && s >= critical_values(&p).s1_star {
            prop_assert!(w1(&p, s) <= f1(&p, s) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn minimizers_attain_the_minimum(p in params()) {
        let res = dominating_points(&p);
        for (t, s) in res.minimizers.points() {
            let g = g_qp(&p, t, s).unwrap();
            prop_assert!((g - res.g_min).abs() <= 1e-9 * res.g_min, "g({}, {}) = {} vs {}", t, s, g, res.g_min);
        }
        prop_assert!((res.gamma - adjustment_coefficient(&p)).abs() <= 1e-12 * res.gamma);
        prop_assert_eq!(res.gamma, res.g_min / 2.0);
    }

    #[test]
    fn no_point_beats_the_minimum(p in params(), t in time(), s in time()) {
        let g_min = dominating_points(&p).g_min;
        prop_assert!(g_qp(&p, t, s).unwrap() >= g_min * (1.0 - 1e-12));
    }

    #[test]
    fn gamma_is_non_increasing_in_rho(mu1 in 0.2f64..5.0, ratio in 1.0f64..10.0, a in -0.95f64..0.95, b in -0.95f64..0.95) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let gamma = |r| adjustment_coefficient(&ModelParams::new(mu1, mu1 * ratio, r).unwrap());
        prop_assert!(gamma(hi) <= gamma(lo) * (1.0 + 1e-14));
    }

    #[test]
    fn equal_drifts_skip_the_outer_regimes(mu in 0.2f64..5.0, rho in -0.95f64..0.95) {
        let r = classify_regime(&ModelParams::new(mu, mu, rho).unwrap());
        prop_assert!(!matches!(r, Regime::SubRho1 | Regime::SuperRho2));
    }
}
