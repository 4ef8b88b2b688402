//! Dominating points, minimal value of `g` and the adjustment coefficient in
//! closed form.
//!
//! The correlation axis splits into six regimes at `0`, `rho_hat_1` and
//! `rho_hat_2`. Nothing here minimises numerically; the grid oracle does that
//! independently.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::model::{critical_values, f1, w1, ModelParams};

/// Relative half-width of the band treated as lying exactly on a threshold.
pub const BOUNDARY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// (i) `-1 < rho < 0`
    NegRho,
    /// (ii) `0 <= rho < rho_hat_1`
    SubRho1,
    /// (iii) `rho = rho_hat_1`
    AtRho1,
    /// (iv) `rho_hat_1 < rho < rho_hat_2`
    Mid,
    /// (v) `rho = rho_hat_2`
    AtRho2,
    /// (vi) `rho_hat_2 < rho < 1`
    SuperRho2,
}

impl Regime {
    pub fn roman(self) -> &'static str {
        match self {
            Regime::NegRho => "i",
            Regime::SubRho1 => "ii",
            Regime::AtRho1 => "iii",
            Regime::Mid => "iv",
            Regime::AtRho2 => "v",
            Regime::SuperRho2 => "vi",
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, Regime::AtRho1 | Regime::AtRho2)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Regime::NegRho => "NEG_RHO",
            Regime::SubRho1 => "SUB_RHO1",
            Regime::AtRho1 => "AT_RHO1",
            Regime::Mid => "MID",
            Regime::AtRho2 => "AT_RHO2",
            Regime::SuperRho2 => "SUPER_RHO2",
        };
        write!(f, "({}) {}", self.roman(), name)
    }
}

fn on_threshold(rho: f64, threshold: f64) -> bool {
    (rho - threshold).abs() <= BOUNDARY_TOL * threshold.abs().max(1.0)
}

pub fn classify_regime(p: &ModelParams) -> Regime {
    let rho = p.rho();
    let cv = critical_values(p);
    if on_threshold(rho, cv.rho_hat_1) {
        Regime::AtRho1
    } else if rho < 0.0 {
        Regime::NegRho
    } else if rho < cv.rho_hat_1 {
        Regime::SubRho1
    } else if on_threshold(rho, cv.rho_hat_2) {
        Regime::AtRho2
    } else if rho < cv.rho_hat_2 {
        Regime::Mid
    } else {
        Regime::SuperRho2
    }
}

/// Where `g` attains its infimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Minimizers {
    Unique { point: (f64, f64) },
    /// Equal drifts and negative correlation: a point and its mirror image.
    Pair { first: (f64, f64), second: (f64, f64) },
    /// The slice `{(t, s) in D2 : s = 1/mu2}`, on which `g = g2(1/mu2)`.
    Segment { s: f64, t_from: f64, t_to: f64, representative: (f64, f64) },
}

impl Minimizers {
    /// Points that attain the minimum; the representative for a segment.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match *self {
            Minimizers::Unique { point } => vec![point],
            Minimizers::Pair { first, second } => vec![first, second],
            Minimizers::Segment { representative, .. } => vec![representative],
        }
    }

    pub fn representative(&self) -> (f64, f64) {
        self.points()[0]
    }

    /// Distance from `(t, s)` to the minimiser set (Chebyshev norm).
    pub fn distance(&self, (t, s): (f64, f64)) -> f64 {
        let d = |(a, b): (f64, f64)| (a - t).abs().max((b - s).abs());
        match *self {
            Minimizers::Segment { s: s0, t_from, t_to, .. } => {
                let dt = if t < t_from {
                    t_from - t
                } else if t > t_to {
                    t - t_to
                } else {
                    0.0
                };
                dt.max((s - s0).abs())
            }
            _ => self.points().into_iter().map(d).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsResult {
    pub regime: Regime,
    /// True when `rho` fell inside the tolerance band of a threshold.
    pub boundary: bool,
    pub minimizers: Minimizers,
    pub g_min: f64,
    pub gamma: f64,
}

pub fn dominating_points(p: &ModelParams) -> AsymptoticsResult {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    let cv = critical_values(p);
    let regime = classify_regime(p);
    let below_rho1 = 4.0 * (mu2 + (1.0 - 2.0 * rho) * mu1);
    let (minimizers, g_min) = match regime {
        Regime::NegRho if p.equal_drifts() => {
            let mu = mu1;
            let a = ((1.0 - 2.0 * rho) / mu, 1.0 / ((1.0 - 2.0 * rho) * mu));
            (
                Minimizers::Pair { first: a, second: (a.1, a.0) },
                8.0 * (1.0 - rho) * mu,
            )
        }
        Regime::NegRho | Regime::SubRho1 => {
            (Minimizers::Unique { point: (cv.t_a, cv.s_a) }, below_rho1)
        }
        Regime::AtRho1 => (
            Minimizers::Unique { point: (cv.t_star, cv.s_star) },
            below_rho1,
        ),
        Regime::Mid => (
            Minimizers::Unique { point: (cv.t_star, cv.s_star) },
            2.0 / (1.0 + rho) * (mu1 + mu2 + 2.0 / cv.t_star),
        ),
        Regime::AtRho2 => (
            Minimizers::Unique { point: (1.0 / mu2, 1.0 / mu2) },
            4.0 * mu2,
        ),
        Regime::SuperRho2 => {
            let s = 1.0 / mu2;
            // w1(1/mu2) = t_B and f1(1/mu2) = (2 rho - 1)/mu1.
            let (t_from, t_to) = (w1(p, s), f1(p, s));
            let representative = (s.clamp(t_from, t_to), s);
            (
                Minimizers::Segment { s, t_from, t_to, representative },
                4.0 * mu2,
            )
        }
    };
    AsymptoticsResult {
        regime,
        boundary: regime.is_boundary(),
        minimizers,
        g_min,
        gamma: g_min / 2.0,
    }
}

/// Adjustment coefficient `lim -ln P(u) / u` from the three-branch formula.
pub fn adjustment_coefficient(p: &ModelParams) -> f64 {
    let (mu1, mu2, rho) = (p.mu1(), p.mu2(), p.rho());
    let cv = critical_values(p);
    if rho <= cv.rho_hat_1 {
        2.0 * (mu2 + (1.0 - 2.0 * rho) * mu1)
    } else if rho < cv.rho_hat_2 {
        (mu1 + mu2 + 2.0 / cv.t_star) / (1.0 + rho)
    } else {
        2.0 * mu2
    }
}

#[cfg(all(test, not(feature = "mutate-ga")))]
mod tests {
    use super::*;
    use crate::model::rho_hat_1;
    use crate::objective::g_closed;
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, rho: f64) -> ModelParams {
        ModelParams::new(mu1, mu2, rho).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(&params(1.0, 2.0, -0.3)), Regime::NegRho);
        assert_eq!(classify_regime(&params(1.0, 2.0, 0.1)), Regime::SubRho1);
        assert_eq!(classify_regime(&params(1.0, 2.0, 0.5)), Regime::Mid);
        assert_eq!(classify_regime(&params(1.0, 2.0, 0.75)), Regime::AtRho2);
        assert_eq!(classify_regime(&params(1.0, 2.0, 0.9)), Regime::SuperRho2);
        assert_eq!(classify_regime(&params(1.0, 1.0, 0.0)), Regime::AtRho1);
        let r1 = rho_hat_1(1.0, 2.0);
        assert_eq!(classify_regime(&params(1.0, 2.0, r1)), Regime::AtRho1);
        assert_eq!(classify_regime(&params(1.0, 2.0, r1 * (1.0 + 1e-14))), Regime::AtRho1);
        assert_eq!(classify_regime(&params(1.0, 2.0, r1 * (1.0 + 1e-9))), Regime::Mid);
    }

    #[test]
    fn equal_drifts_never_reach_ii_or_vi() {
        for i in 0..200 {
            let rho = -0.995 + i as f64 * 0.01;
            let r = classify_regime(&params(1.3, 1.3, rho));
            assert!(!matches!(r, Regime::SubRho1 | Regime::SuperRho2), "rho = {rho}");
        }
    }

    #[test]
    fn negative_correlation_unique_point() {
        let res = dominating_points(&params(1.0, 2.0, -0.5));
        assert_eq!(res.regime, Regime::NegRho);
        let (t, s) = res.minimizers.representative();
        assert_relative_eq!(t, 2.0, max_relative = 1e-15);
        assert_relative_eq!(s, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(res.g_min, 16.0, max_relative = 1e-15);
        assert_relative_eq!(res.gamma, 8.0, max_relative = 1e-15);
    }

    #[test]
    fn negative_correlation_equal_drifts_pair() {
        let res = dominating_points(&params(1.0, 1.0, -0.5));
        match res.minimizers {
            Minimizers::Pair { first, second } => {
                assert_eq!(first, (2.0, 0.5));
                assert_eq!(second, (0.5, 2.0));
            }
            other => panic!("expected a pair, got {other:?}"),
        }
        assert_relative_eq!(res.g_min, 12.0, max_relative = 1e-15);
    }

    #[test]
    fn at_rho_hat_2() {
        let res = dominating_points(&params(1.0, 2.0, 0.75));
        assert!(res.boundary);
        assert_eq!(res.minimizers, Minimizers::Unique { point: (0.5, 0.5) });
        assert_eq!(res.g_min, 8.0);
        assert_eq!(res.gamma, 4.0);
    }

    #[test]
    fn super_rho_2_segment() {
        let p = params(1.0, 2.0, 0.9);
        let res = dominating_points(&p);
        let Minimizers::Segment { s, t_from, t_to, representative } = res.minimizers else {
            panic!("expected a segment");
        };
        assert_eq!(s, 0.5);
        assert_relative_eq!(t_from, 1.0 / (2.0 * 0.9 * 2.0 - 1.0), max_relative = 1e-14);
        assert_relative_eq!(t_to, 0.8, max_relative = 1e-14);
        assert_eq!(representative, (0.5, 0.5));
        for k in 0..=10 {
            let t = t_from + (t_to - t_from) * k as f64 / 10.0;
            assert_relative_eq!(g_closed(&p, t, s).unwrap().value, 8.0, max_relative = 1e-14);
        }
        assert_eq!(res.minimizers.distance((0.6, 0.5)), 0.0);
        assert_relative_eq!(res.minimizers.distance((0.9, 0.5)), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn theorem_spot_values() {
        assert_eq!(adjustment_coefficient(&params(1.0, 2.0, 0.9)), 4.0);
        assert_eq!(adjustment_coefficient(&params(1.0, 1.0, 0.0)), 4.0);
        assert_relative_eq!(
            adjustment_coefficient(&params(1.0, 2.0, 0.5)),
            (3.0 + 2.0 * 3.0_f64.sqrt()) / 1.5,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            adjustment_coefficient(&params(1.0, 2.0, 0.5)),
            4.309_401_076_758_503,
            max_relative = 1e-14
        );
    }

    #[test]
    fn listed_minimisers_attain_g_min() {
        for &(mu1, mu2) in &[(1.0, 2.0), (1.0, 1.0), (0.5, 5.0)] {
            for i in 0..40 {
                let rho = -0.95 + i as f64 * 0.0485;
                let p = params(mu1, mu2, rho);
                let res = dominating_points(&p);
                for (t, s) in res.minimizers.points() {
                    let v = g_closed(&p, t, s).unwrap().value;
                    assert!(
                        (v - res.g_min).abs() <= 1e-12 * res.g_min,
                        "{p:?}: g({t}, {s}) = {v} vs {}",
                        res.g_min
                    );
                }
            }
        }
    }
}
