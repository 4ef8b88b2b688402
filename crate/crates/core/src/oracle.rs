//! Brute-force minimisation of `g` over the open quadrant.
//!
//! The search runs on a log-spaced square grid, then repeatedly zooms into a
//! smaller box around the incumbent. Every evaluation goes through the QP
//! path ([`g_qp`]), never the closed form, so the oracle shares no algebra
//! with the module it is used to check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

use crate::model::{critical_values, ModelParams};
use crate::objective::{g_qp, ObjectiveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("could not build a finite search box from the candidate points")]
    BoxDegenerate,
    #[error("grid minimiser ({t}, {s}) lies within two cells of the search box edge")]
    BoundaryHit { t: f64, s: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Margin factor `c`: the box spans `[min/c, c * max]` of the candidate coordinates.
    pub t_max_multiplier: f64,
    /// Nodes per axis.
    pub initial_grid: usize,
    pub refinement_rounds: usize,
    /// Ratio of successive box widths, measured in log coordinates.
    pub zoom_factor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            t_max_multiplier: 4.0,
            initial_grid: 400,
            refinement_rounds: 4,
            zoom_factor: 0.15,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<(), OracleError> {
        if !(self.t_max_multiplier.is_finite() && self.t_max_multiplier >= 2.0) {
            return Err(OracleError::Config(format!(
                "t_max_multiplier must be >= 2, got {}",
                self.t_max_multiplier
            )));
        }
        if self.initial_grid < 8 {
            return Err(OracleError::Config(format!(
                "initial_grid must be >= 8, got {}",
                self.initial_grid
            )));
        }
        if !(self.zoom_factor > 0.0 && self.zoom_factor < 1.0) {
            return Err(OracleError::Config(format!(
                "zoom_factor must lie in (0, 1), got {}",
                self.zoom_factor
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[t_lo, t_hi] x [s_lo, s_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl SearchBox {
    pub fn contains_strictly(&self, (t, s): (f64, f64)) -> bool {
        self.t_lo < t && t < self.t_hi && self.s_lo < s && s < self.s_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub arg_min: (f64, f64),
    pub min_value: f64,
    pub evaluations: u64,
    /// The initial box, anchored on the closed-form candidates.
    pub box_used: SearchBox,
    /// Incumbent value after each round, starting with the coarse grid.
    pub round_minima: Vec<f64>,
}

/// Positive, finite coordinates of the closed-form candidate points.
pub fn candidate_coordinates(p: &ModelParams) -> Vec<f64> {
    let cv = critical_values(p);
    [
        cv.t_a,
        cv.s_a,
        cv.t_b,
        cv.s_b,
        cv.t_star,
        1.0 / p.mu1(),
        1.0 / p.mu2(),
        cv.s1_star,
    ]
    .into_iter()
    .filter(|x| x.is_finite() && *x > 0.0)
    .collect()
}

pub fn candidate_box(p: &ModelParams, multiplier: f64) -> Result<SearchBox, OracleError> {
    let coords = candidate_coordinates(p);
    let lo = coords.iter().copied().fold(f64::INFINITY, f64::min) / multiplier;
    let hi = coords.iter().copied().fold(0.0, f64::max) * multiplier;
    if !(lo > 0.0 && hi.is_finite() && lo < hi) {
        return Err(OracleError::BoxDegenerate);
    }
    Ok(SearchBox { t_lo: lo, t_hi: hi, s_lo: lo, s_hi: hi })
}

/// Grid incumbent. Ties break on `(value, t, s)` so the parallel reduction
/// does not depend on the schedule.
#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    t: f64,
    s: f64,
}

impl Best {
    const NONE: Best = Best { value: f64::INFINITY, t: f64::INFINITY, s: f64::INFINITY };

    fn key_cmp(&self, other: &Best) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.t.total_cmp(&other.t))
            .then(self.s.total_cmp(&other.s))
    }

    fn min(self, other: Best) -> Best {
        if other.key_cmp(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

fn log_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn scan(p: &ModelParams, ts: &[f64], ss: &[f64]) -> Result<Best, OracleError> {
    ts.par_iter()
        .map(|&t| {
            let mut best = Best::NONE;
            for &s in ss {
                let value = g_qp(p, t, s)?;
                best = best.min(Best { value, t, s });
            }
            Ok(best)
        })
        .try_reduce(|| Best::NONE, |a, b| Ok(a.min(b)))
}

/// Log-coordinate interval of half-width `half` around `centre`, shifted to
/// stay inside `[lo, hi]`.
fn zoom_interval(centre: f64, half: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (c, a, b) = (centre.ln(), lo.ln(), hi.ln());
    let half = half.min(0.5 * (b - a));
    let c = c.clamp(a + half, b - half);
    ((c - half).exp(), (c + half).exp())
}

pub fn grid_minimize(p: &ModelParams, cfg: &OracleConfig) -> Result<OracleResult, OracleError> {
    cfg.validate()?;
    let outer = candidate_box(p, cfg.t_max_multiplier)?;
    let n = cfg.initial_grid;

    let ts = log_nodes(outer.t_lo, outer.t_hi, n);
    let ss = log_nodes(outer.s_lo, outer.s_hi, n);
    let mut best = scan(p, &ts, &ss)?;
    let mut evaluations = (n * n) as u64;
    let mut round_minima = vec![best.value];

    // Both axes share the same nodes while the incumbent sits on the
    // diagonal, so diagonal minimisers stay exactly representable.
    let cell = (outer.t_hi / outer.t_lo).ln() / (n - 1) as f64;
    if (best.t / outer.t_lo).ln() <= 2.0 * cell
        || (outer.t_hi / best.t).ln() <= 2.0 * cell
        || (best.s / outer.s_lo).ln() <= 2.0 * cell
        || (outer.s_hi / best.s).ln() <= 2.0 * cell
    {
        return Err(OracleError::BoundaryHit { t: best.t, s: best.s });
    }

    let mut half = 0.5 * (outer.t_hi / outer.t_lo).ln();
    for _ in 0..cfg.refinement_rounds {
        half *= cfg.zoom_factor;
        let (t_lo, t_hi) = zoom_interval(best.t, half, outer.t_lo, outer.t_hi);
        let (s_lo, s_hi) = zoom_interval(best.s, half, outer.s_lo, outer.s_hi);
        let round = scan(p, &log_nodes(t_lo, t_hi, n), &log_nodes(s_lo, s_hi, n))?;
        evaluations += (n * n) as u64;
        best = best.min(round);
        round_minima.push(best.value);
    }

    Ok(OracleResult {
        arg_min: (best.t, best.s),
        min_value: best.value,
        evaluations,
        box_used: outer,
        round_minima,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "at", rename_all = "snake_case")]
pub enum Slice {
    /// `t` fixed, `s` varies.
    TFixed(f64),
    /// `s` fixed, `t` varies.
    SFixed(f64),
    Diagonal,
}

/// `n` evenly spaced evaluations of `g` (QP path) along a slice, with the
/// free coordinate running over `[from, to]`.
pub fn profile_slice(
    p: &ModelParams,
    slice: Slice,
    from: f64,
    to: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, OracleError> {
    if n < 2 {
        return Err(OracleError::Config(format!("profile needs n >= 2, got {n}")));
    }
    (0..n)
        .map(|i| {
            let x = from + (to - from) * i as f64 / (n - 1) as f64;
            let g = match slice {
                Slice::TFixed(t) => g_qp(p, t, x)?,
                Slice::SFixed(s) => g_qp(p, x, s)?,
                Slice::Diagonal => g_qp(p, x, x)?,
            };
            Ok((x, g))
        })
        .collect()
}

#[cfg(all(test, not(feature = "mutate-ga")))]
mod tests {
    use super::*;
    use crate::model::{f1, w1};
    use approx::assert_relative_eq;

    fn params(mu1: f64, mu2: f64, rho: f64) -> ModelParams {
        ModelParams::new(mu1, mu2, rho).unwrap()
    }

    #[test]
    fn independent_case() {
        let res = grid_minimize(&params(1.0, 1.0, 0.0), &OracleConfig::default()).unwrap();
        assert!((res.min_value - 8.0).abs() <= 1e-6 * 8.0, "{}", res.min_value);
        assert!((res.arg_min.0 - 1.0).abs() < 1e-3 && (res.arg_min.1 - 1.0).abs() < 1e-3);
        assert_eq!(res.evaluations, 5 * 400 * 400);
    }

    #[test]
    fn negative_correlation_case() {
        let res = grid_minimize(&params(1.0, 2.0, -0.5), &OracleConfig::default()).unwrap();
        assert!((res.min_value - 16.0).abs() <= 1e-6 * 16.0);
        assert!((res.arg_min.0 - 2.0).abs() < 1e-3, "{:?}", res.arg_min);
        assert!((res.arg_min.1 - 1.0 / 3.0).abs() < 1e-3, "{:?}", res.arg_min);
    }

    #[test]
    fn flat_segment_case() {
        let p = params(1.0, 2.0, 0.9);
        let res = grid_minimize(&p, &OracleConfig::default()).unwrap();
        assert!((res.min_value - 8.0).abs() <= 1e-6 * 8.0);
        let (t, s) = res.arg_min;
        assert!((s - 0.5).abs() < 1e-3);
        assert!(t >= w1(&p, 0.5) - 1e-3 && t <= f1(&p, 0.5) + 1e-3);
    }

    #[test]
    fn refinement_is_monotone_and_box_contains_candidates() {
        let p = params(0.5, 1.5, 0.3);
        let res = grid_minimize(&p, &OracleConfig::default()).unwrap();
        assert!(res.round_minima.windows(2).all(|w| w[1] <= w[0]));
        for x in candidate_coordinates(&p) {
            assert!(res.box_used.contains_strictly((x, x)));
            assert!(x / res.box_used.t_lo >= 2.0 && res.box_used.t_hi / x >= 2.0);
        }
    }

    #[test]
    fn deterministic() {
        let p = params(1.0, 3.0, 0.2);
        let cfg = OracleConfig { initial_grid: 60, ..OracleConfig::default() };
        let a = grid_minimize(&p, &cfg).unwrap();
        let b = grid_minimize(&p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_errors() {
        let p = params(1.0, 2.0, 0.0);
        let bad = OracleConfig { zoom_factor: 1.5, ..OracleConfig::default() };
        assert!(matches!(grid_minimize(&p, &bad), Err(OracleError::Config(_))));
        let bad = OracleConfig { initial_grid: 2, ..OracleConfig::default() };
        assert!(grid_minimize(&p, &bad).is_err());
    }

    #[test]
    fn diagonal_profile() {
        let prof = profile_slice(&params(1.0, 1.0, 0.0), Slice::Diagonal, 0.5, 1.5, 3).unwrap();
        assert_eq!(prof.len(), 3);
        assert_eq!(prof[1].0, 1.0);
        assert_relative_eq!(prof[1].1, 8.0, max_relative = 1e-15);

        let p = params(1.0, 2.0, 0.5);
        let t_star = (1.0_f64 / 3.0).sqrt();
        let prof = profile_slice(&p, Slice::Diagonal, 0.2, 1.0, 801).unwrap();
        let (x, _) = prof
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((x - t_star).abs() <= 1e-3, "{x}");
    }

    #[test]
    fn s_fixed_profile_is_flat_across_d2() {
        let p = params(1.0, 2.0, 0.9);
        let (lo, hi) = (w1(&p, 0.5), f1(&p, 0.5));
        let prof = profile_slice(&p, Slice::SFixed(0.5), 0.1, 1.5, 141).unwrap();
        let mut inside = 0;
        for (t, g) in prof {
            if t >= lo && t <= hi {
                inside += 1;
                assert_relative_eq!(g, 8.0, max_relative = 1e-12);
            } else {
                assert!(g > 8.0);
            }
        }
        assert!(inside > 35);
        assert!(profile_slice(&p, Slice::TFixed(1.0), 0.1, 1.0, 1).is_err());
    }
}
