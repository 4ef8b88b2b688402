//! The two-layer objective
//!
//! ```text
//! g(t, s) = inf { (x, y) Sigma_ts^-1 (x, y)' : x >= 1 + mu1 t, y >= 1 + mu2 s }
//! ```
//!
//! in two independent forms: [`g_qp`] solves the inner quadratic program
//! numerically, [`g_closed`] picks the matching closed-form piece. Their
//! agreement is the main internal consistency check of the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{classify_point, ModelError, ModelParams, Piece, Region, Side};
use crate::qp::{min_value_only, CovarianceMatrix, QpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

/// Which closed form produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    G3A,
    G3B,
    GL,
    G2OnD2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub representation: Representation,
    pub region: Region,
}

/// Lower bounds of the inner program, `(1 + mu1 t, 1 + mu2 s)`.
pub fn constraint_vector(p: &ModelParams, t: f64, s: f64) -> [f64; 2] {
    [1.0 + p.mu1() * t, 1.0 + p.mu2() * s]
}

/// `g` through the quadratic-programming solver.
pub fn g_qp(p: &ModelParams, t: f64, s: f64) -> Result<f64, ObjectiveError> {
    if !(t > 0.0 && s > 0.0 && t.is_finite() && s.is_finite()) {
        return Err(ModelError::NonPositiveTime(t, s).into());
    }
    let m = CovarianceMatrix::brownian(t, s, p.rho())?;
    Ok(min_value_only(&m, constraint_vector(p, t, s))?)
}

pub fn g1(p: &ModelParams, t: f64) -> f64 {
    (1.0 + p.mu1() * t).powi(2) / t
}

pub fn g2(p: &ModelParams, s: f64) -> f64 {
    (1.0 + p.mu2() * s).powi(2) / s
}

/// `g_3` on the closed half `s <= t`.
pub fn g_a(p: &ModelParams, t: f64, s: f64) -> f64 {
    let rho = p.rho();
    let denom = t - rho * rho * s;
    debug_assert!(denom > 0.0, "g_A evaluated outside s <= t: t = {t}, s = {s}");
    let (x, y) = (1.0 + p.mu1() * t, 1.0 + p.mu2() * s);
    #[cfg(not(feature = "mutate-ga"))]
    let cross = x - rho * y;
    #[cfg(feature = "mutate-ga")]
    let cross = x + rho * y;
    y * y / s + cross * cross / denom
}

/// `g_3` on the closed half `s >= t`.
pub fn g_b(p: &ModelParams, t: f64, s: f64) -> f64 {
    let rho = p.rho();
    let denom = s - rho * rho * t;
    debug_assert!(denom > 0.0, "g_B evaluated outside s >= t: t = {t}, s = {s}");
    let (x, y) = (1.0 + p.mu1() * t, 1.0 + p.mu2() * s);
    let cross = y - rho * x;
    x * x / t + cross * cross / denom
}

/// Objective with both constraints active, `b' Sigma_ts^-1 b`.
pub fn g3(p: &ModelParams, t: f64, s: f64) -> f64 {
    if s <= t {
        g_a(p, t, s)
    } else {
        g_b(p, t, s)
    }
}

/// `g` restricted to the diagonal.
pub fn g_l(p: &ModelParams, s: f64) -> f64 {
    let rho = p.rho();
    let (x, y) = (1.0 + p.mu1() * s, 1.0 + p.mu2() * s);
    (x * x + y * y - 2.0 * rho * x * y) / ((1.0 - rho * rho) * s)
}

/// `g_A(t2(s), s)`: `g_A` minimised over `t` at the interior stationary point.
pub fn f_a(p: &ModelParams, s: f64) -> f64 {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    g2(p, s) + 4.0 * mu1 * ((1.0 - rho) + (rho * rho * mu1 - rho * mu2) * s)
}

/// `g_B(t, s2(t))`, the mirror image of [`f_a`].
pub fn f_b(p: &ModelParams, t: f64) -> f64 {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    g1(p, t) + 4.0 * mu2 * ((1.0 - rho) + (rho * rho * mu2 - rho * mu1) * t)
}

/// `g` through the piecewise closed form.
pub fn g_closed(p: &ModelParams, t: f64, s: f64) -> Result<ObjectiveValue, ModelError> {
    let region = classify_point(p, t, s)?;
    let (value, representation) = match (region.piece, region.side) {
        (Piece::D2, _) => (g2(p, s), Representation::G2OnD2),
        (Piece::D1, Side::L) => (g_l(p, s), Representation::GL),
        (Piece::D1, Side::A) => (g_a(p, t, s), Representation::G3A),
        (Piece::D1, Side::B) => (g_b(p, t, s), Representation::G3B),
    };
    Ok(ObjectiveValue { value, representation, region })
}

/// The two roots of an inner stationarity condition. They may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryTimes {
    pub first: f64,
    pub second: f64,
}

/// Roots `t1(s)`, `t2(s)` of `d g_A / d t = 0` at fixed `s`.
pub fn t_roots(p: &ModelParams, s: f64) -> StationaryTimes {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    StationaryTimes {
        first: (rho - 1.0 + rho * mu2 * s) / mu1,
        second: (1.0 - rho + (2.0 * mu1 * rho * rho - rho * mu2) * s) / mu1,
    }
}

/// Roots `s1(t)`, `s2(t)` of `d g_B / d s = 0` at fixed `t`.
pub fn s_roots(p: &ModelParams, t: f64) -> StationaryTimes {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    StationaryTimes {
        first: (rho - 1.0 + rho * mu1 * t) / mu2,
        second: (1.0 - rho + (2.0 * mu2 * rho * rho - rho * mu1) * t) / mu2,
    }
}

#[cfg(all(test, not(feature = "mutate-ga")))]
mod tests {
    use super::*;
    use crate::model::{critical_values, f1, w1};
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, rho: f64) -> ModelParams {
        ModelParams::new(mu1, mu2, rho).unwrap()
    }

    #[test]
    fn independent_unit_case() {
        let p = params(1.0, 1.0, 0.0);
        assert_relative_eq!(g_qp(&p, 1.0, 1.0).unwrap(), 8.0, max_relative = 1e-15);
        assert_relative_eq!(g_l(&p, 1.0), 8.0, max_relative = 1e-15);
        let v = g_closed(&p, 2.0, 1.0).unwrap();
        assert_eq!(v.representation, Representation::G3A);
        assert_relative_eq!(v.value, 8.5, max_relative = 1e-15);
        assert_relative_eq!(g_qp(&p, 2.0, 1.0).unwrap(), 8.5, max_relative = 1e-14);
    }

    #[test]
    fn qp_matches_g_l_at_t_star() {
        let p = params(1.0, 2.0, 0.5);
        let t = (1.0_f64 / 3.0).sqrt();
        assert_relative_eq!(critical_values(&p).t_star, t, max_relative = 1e-15);
        // (2/(1+rho))(mu1 + mu2 + 2/t*) is g_L(t*); evaluated independently.
        let expected = 2.0 / 1.5 * (3.0 + 2.0 / t);
        assert_relative_eq!(g_l(&p, t), expected, max_relative = 1e-12);
        assert_relative_eq!(g_qp(&p, t, t).unwrap(), expected, max_relative = 1e-12);
        let v = g_closed(&p, t, t).unwrap();
        assert_eq!(v.representation, Representation::GL);
    }

    #[test]
    fn d2_points_take_g2() {
        let p = params(1.0, 2.0, 0.9);
        let s = 0.5;
        let t = 0.5 * (w1(&p, s) + f1(&p, s));
        let expected = (1.0 + 2.0 * s).powi(2) / s;
        let v = g_closed(&p, t, s).unwrap();
        assert_eq!(v.representation, Representation::G2OnD2);
        assert_relative_eq!(v.value, expected, max_relative = 1e-15);
        assert_relative_eq!(g_qp(&p, t, s).unwrap(), expected, max_relative = 1e-12);
        let on_f1 = g_closed(&p, f1(&p, 2.0), 2.0).unwrap();
        assert_relative_eq!(on_f1.value, g2(&p, 2.0), max_relative = 1e-15);
        assert_relative_eq!(g3(&p, f1(&p, 2.0), 2.0), g2(&p, 2.0), max_relative = 1e-12);
    }

    #[test]
    fn diagonal_uses_g_l() {
        let p = params(0.7, 1.9, -0.4);
        for x in [0.05, 0.3, 1.0, 7.0] {
            let v = g_closed(&p, x, x).unwrap();
            assert_eq!(v.representation, Representation::GL);
            assert_eq!(v.value, g_l(&p, x));
            assert_relative_eq!(g_a(&p, x, x), g_l(&p, x), max_relative = 1e-13);
            assert_relative_eq!(g_b(&p, x, x), g_l(&p, x), max_relative = 1e-13);
        }
    }

    #[test]
    fn scalar_helper_values() {
        let p = params(1.0, 2.0, -0.5);
        assert_relative_eq!(g2(&p, 0.5), 8.0, max_relative = 1e-15);
        let s_a = critical_values(&p).s_a;
        assert_relative_eq!(s_a, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(f_a(&p, s_a), 4.0 * (2.0 + 2.0 * 1.0), max_relative = 1e-14);
        assert_relative_eq!(g1(&p, 1.0), 4.0);
        // f_B mirrors f_A: at t_B it equals 4(mu1 + (1 - 2 rho) mu2).
        let t_b = critical_values(&p).t_b;
        assert_relative_eq!(f_b(&p, t_b), 4.0 * (1.0 + 2.0 * 2.0), max_relative = 1e-14);
    }

    #[test]
    fn f_a_is_g_a_along_t2() {
        let p = params(1.0, 2.0, -0.5);
        for s in [0.1, 1.0 / 3.0, 0.8] {
            let t2 = t_roots(&p, s).second;
            assert_relative_eq!(g_a(&p, t2, s), f_a(&p, s), max_relative = 1e-13);
        }
    }

    #[test]
    fn stationary_roots() {
        let p = params(1.0, 2.0, -0.5);
        let r = t_roots(&p, 1.0 / 3.0);
        assert_relative_eq!(r.second, 2.0, max_relative = 1e-15);
        assert_relative_eq!(r.second, critical_values(&p).t_a, max_relative = 1e-15);
        for s in [0.01, 1.0, 50.0] {
            assert!(t_roots(&p, s).first < 0.0);
            assert!(s_roots(&p, s).first < 0.0);
        }
        let z = params(1.0, 2.0, 0.0);
        assert_eq!(t_roots(&z, 1.0), StationaryTimes { first: -1.0, second: 1.0 });
    }

    #[test]
    fn g_qp_rejects_bad_times() {
        let p = params(1.0, 2.0, 0.0);
        assert!(matches!(g_qp(&p, 0.0, 1.0), Err(ObjectiveError::Model(_))));
        assert!(g_closed(&p, 1.0, -1.0).is_err());
    }
}
