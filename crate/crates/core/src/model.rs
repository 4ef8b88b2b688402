//! Problem instances, derived critical constants and the geometry of the
//! `(t, s)` quadrant.
//!
//! A model is two unit-volatility Brownian surplus lines with drifts
//! `mu1 <= mu2` and correlation `rho`. Everything else in the crate is a
//! function of a validated [`ModelParams`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(
        "mu1 = {mu1} exceeds mu2 = {mu2}; the lines must be ordered so that mu1 <= mu2 \
         (swap them before calling, or pass --sort on the command line)"
    )]
    Unsorted { mu1: f64, mu2: f64 },
    #[error("drift must be positive and finite, got {0}")]
    NonPositiveDrift(f64),
    #[error("correlation must lie in the open interval (-1, 1), got {0}")]
    CorrelationOutOfRange(f64),
    #[error("times must be positive and finite, got (t, s) = ({0}, {1})")]
    NonPositiveTime(f64, f64),
}

/// A validated problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    mu1: f64,
    mu2: f64,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    mu1: f64,
    mu2: f64,
    rho: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ModelError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        ModelParams::new(raw.mu1, raw.mu2, raw.rho)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { mu1: p.mu1, mu2: p.mu2, rho: p.rho }
    }
}

impl ModelParams {
    /// Validates `0 < mu1 <= mu2` and `-1 < rho < 1`. Unsorted drifts are
    /// rejected, not swapped; see [`ModelParams::sorted`].
    pub fn new(mu1: f64, mu2: f64, rho: f64) -> Result<Self, ModelError> {
        for mu in [mu1, mu2] {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(ModelError::NonPositiveDrift(mu));
            }
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(ModelError::CorrelationOutOfRange(rho));
        }
        if mu1 > mu2 {
            return Err(ModelError::Unsorted { mu1, mu2 });
        }
        Ok(ModelParams { mu1, mu2, rho })
    }

    /// Like [`ModelParams::new`] but relabels the lines when `a > b`.
    pub fn sorted(a: f64, b: f64, rho: f64) -> Result<Self, ModelError> {
        if a > b {
            Self::new(b, a, rho)
        } else {
            Self::new(a, b, rho)
        }
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same instance with a different correlation.
    pub fn with_rho(&self, rho: f64) -> Result<Self, ModelError> {
        Self::new(self.mu1, self.mu2, rho)
    }

    pub fn equal_drifts(&self) -> bool {
        self.mu1 == self.mu2
    }

    /// `rho > mu1 / mu2`, the condition under which the region `D2` is
    /// non-empty. With equal drifts this reads `rho > 1` and never holds.
    pub fn has_d2(&self) -> bool {
        self.rho > self.mu1 / self.mu2
    }
}

/// Regime thresholds and candidate optimiser coordinates. Quantities that are
/// undefined for the current `rho` hold `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub rho_hat_1: f64,
    pub rho_hat_2: f64,
    /// Positive root of `mu2 + rho mu1 - 2 mu2 rho^2 = 0`, where `t**` blows up.
    pub rho_hat: f64,
    pub t_star: f64,
    pub s_star: f64,
    #[serde(with = "extended")]
    pub s1_star: f64,
    #[serde(with = "extended")]
    pub s_double_star: f64,
    #[serde(with = "extended")]
    pub t_double_star: f64,
    pub t_a: f64,
    #[serde(with = "extended")]
    pub s_a: f64,
    #[serde(with = "extended")]
    pub t_b: f64,
    pub s_b: f64,
}

/// `1 / x` for `x > 0`, `+inf` otherwise.
fn recip_or_inf(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        f64::INFINITY
    }
}

/// Lower critical correlation, in `[0, 1/2)`.
///
/// Rationalised form of `(m - sqrt(m^2 - 4 mu1 (mu2 - mu1))) / (4 mu1)` with
/// `m = mu1 + mu2`; it avoids the cancellation when `mu1` is close to `mu2`
/// and is exactly zero for equal drifts.
pub fn rho_hat_1(mu1: f64, mu2: f64) -> f64 {
    let m = mu1 + mu2;
    let disc = (mu2 - mu1).powi(2) + 4.0 * mu1 * mu1;
    (mu2 - mu1) / (m + disc.sqrt())
}

pub fn rho_hat_2(mu1: f64, mu2: f64) -> f64 {
    (mu1 + mu2) / (2.0 * mu2)
}

/// Diagonal stationary point `t* = s*` of `g_L`.
pub fn t_star(mu1: f64, mu2: f64, rho: f64) -> f64 {
    (2.0 * (1.0 - rho) / (mu1 * mu1 + mu2 * mu2 - 2.0 * rho * mu1 * mu2)).sqrt()
}

impl CriticalValues {
    pub fn of(p: &ModelParams) -> Self {
        let (mu1, mu2, rho) = (p.mu1, p.mu2, p.rho);
        let t_star = t_star(mu1, mu2, rho);
        // For mu1 <= mu2 the root never exceeds 1; the clamp only absorbs rounding.
        let rho_hat = ((mu1 + (mu1 * mu1 + 8.0 * mu2 * mu2).sqrt()) / (4.0 * mu2)).min(1.0);
        let s1_star = if p.has_d2() {
            (1.0 - rho) / (rho * mu2 - mu1)
        } else {
            f64::INFINITY
        };
        CriticalValues {
            rho_hat_1: rho_hat_1(mu1, mu2),
            rho_hat_2: rho_hat_2(mu1, mu2),
            rho_hat,
            t_star,
            s_star: t_star,
            s1_star,
            s_double_star: (1.0 - rho) * recip_or_inf(mu1 + rho * mu2 - 2.0 * mu1 * rho * rho),
            t_double_star: (1.0 - rho) * recip_or_inf(mu2 + rho * mu1 - 2.0 * mu2 * rho * rho),
            t_a: (1.0 - 2.0 * rho) / mu1,
            s_a: recip_or_inf((mu2 - 2.0 * rho * mu1).abs()),
            t_b: recip_or_inf((mu1 - 2.0 * rho * mu2).abs()),
            s_b: (1.0 - 2.0 * rho) / mu2,
        }
    }
}

pub fn critical_values(p: &ModelParams) -> CriticalValues {
    CriticalValues::of(p)
}

/// Position relative to the diagonal: `A = {s < t}`, `L = {s = t}`, `B = {s > t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    L,
    B,
}

/// Which quadratic-programming representation of `g` applies. `D2` is the
/// wedge `w1(s) <= t <= f1(s)` on which the first constraint is slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Piece {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub side: Side,
    pub piece: Piece,
}

pub fn f1(p: &ModelParams, s: f64) -> f64 {
    (p.rho - 1.0) / p.mu1 + p.rho * p.mu2 / p.mu1 * s
}

pub fn f2(p: &ModelParams, s: f64) -> f64 {
    p.rho * s * recip_or_inf(1.0 + (p.mu2 - p.rho * p.mu1) * s)
}

pub fn w1(p: &ModelParams, s: f64) -> f64 {
    s * recip_or_inf(p.rho + (p.rho * p.mu2 - p.mu1) * s)
}

pub fn w2(p: &ModelParams, s: f64) -> f64 {
    if p.rho == 0.0 {
        return f64::INFINITY;
    }
    (1.0 - p.rho) / (p.mu1 * p.rho) + p.mu2 / (p.mu1 * p.rho) * s
}

pub fn h1(p: &ModelParams, t: f64) -> f64 {
    p.rho * t * recip_or_inf(1.0 + (p.mu1 - p.rho * p.mu2) * t)
}

pub fn h2(p: &ModelParams, t: f64) -> f64 {
    (p.rho - 1.0) / p.mu2 + p.rho * p.mu1 / p.mu2 * t
}

/// Inverse of `w1`, defined on `[s1*, 1/(rho mu2 - mu1))`; `+inf` elsewhere.
pub fn w1_inverse(p: &ModelParams, t: f64) -> f64 {
    let s1 = CriticalValues::of(p).s1_star;
    if !(t >= s1) {
        return f64::INFINITY;
    }
    p.rho * t * recip_or_inf(1.0 - (p.rho * p.mu2 - p.mu1) * t)
}

/// All boundary curves evaluated at one abscissa (`s` for the `f`/`w`
/// families, `t` for `h1`, `h2` and `w1_inverse`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurves {
    #[serde(with = "extended")]
    pub f1: f64,
    #[serde(with = "extended")]
    pub f2: f64,
    #[serde(with = "extended")]
    pub w1: f64,
    #[serde(with = "extended")]
    pub w2: f64,
    #[serde(with = "extended")]
    pub h1: f64,
    #[serde(with = "extended")]
    pub h2: f64,
    #[serde(with = "extended")]
    pub w1_inverse: f64,
}

pub fn boundary_curves(p: &ModelParams, x: f64) -> BoundaryCurves {
    BoundaryCurves {
        f1: f1(p, x),
        f2: f2(p, x),
        w1: w1(p, x),
        w2: w2(p, x),
        h1: h1(p, x),
        h2: h2(p, x),
        w1_inverse: w1_inverse(p, x),
    }
}

fn check_times(t: f64, s: f64) -> Result<(), ModelError> {
    if t.is_finite() && s.is_finite() && t > 0.0 && s > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositiveTime(t, s))
    }
}

/// Classifies `(t, s)`. Points on the `w1`/`f1` boundary belong to `D2`.
pub fn classify_point(p: &ModelParams, t: f64, s: f64) -> Result<Region, ModelError> {
    check_times(t, s)?;
    let side = if s < t {
        Side::A
    } else if s > t {
        Side::B
    } else {
        Side::L
    };
    let piece = if p.has_d2() && w1(p, s) <= t && t <= f1(p, s) {
        Piece::D2
    } else {
        Piece::D1
    };
    Ok(Region { side, piece })
}
