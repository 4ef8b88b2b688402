//! Exact solver for `min x' M^-1 x  s.t.  x >= b` in two dimensions.
//!
//! The minimiser is characterised by a unique non-empty active index set `I`:
//! `x_I = b_I`, `M_II^-1 b_I > 0`, and on the complement
//! `x_Ic = M_IcI M_II^-1 b_I >= b_Ic`. With two coordinates there are only
//! three candidates, so the solver enumerates them and checks the conditions
//! directly. `M^-1` is never formed beyond the 2x2 adjugate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("matrix [[{m11}, {m12}], [{m12}, {m22}]] is not positive definite")]
    NotPositiveDefinite { m11: f64, m12: f64, m22: f64 },
    #[error("lower bound b = ({0}, {1}) lies in (-inf, 0]^2; the minimum would be the trivial x = 0")]
    InfeasibleB(f64, f64),
    #[error("lower bound b = ({0}, {1}) is not finite")]
    NonFiniteB(f64, f64),
}

/// Symmetric positive-definite 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    m11: f64,
    m12: f64,
    m22: f64,
}

impl CovarianceMatrix {
    pub fn new(m11: f64, m12: f64, m22: f64) -> Result<Self, QpError> {
        let det = m11 * m22 - m12 * m12;
        if m11 > 0.0 && m22 > 0.0 && det > 0.0 && m12.is_finite() && det.is_finite() {
            Ok(CovarianceMatrix { m11, m12, m22 })
        } else {
            Err(QpError::NotPositiveDefinite { m11, m12, m22 })
        }
    }

    pub fn identity() -> Self {
        CovarianceMatrix { m11: 1.0, m12: 0.0, m22: 1.0 }
    }

    /// Covariance of `(X1(t), X2(s))`: `[[t, rho (t ^ s)], [rho (t ^ s), s]]`.
    pub fn brownian(t: f64, s: f64, rho: f64) -> Result<Self, QpError> {
        let c = rho * t.min(s);
        Self::new(t, c, s)
    }

    pub fn m11(&self) -> f64 {
        self.m11
    }

    pub fn m12(&self) -> f64 {
        self.m12
    }

    pub fn m22(&self) -> f64 {
        self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn scaled(&self, c: f64) -> Result<Self, QpError> {
        Self::new(c * self.m11, c * self.m12, c * self.m22)
    }

    /// `M^-1 v` through the adjugate.
    pub fn solve(&self, v: [f64; 2]) -> [f64; 2] {
        let det = self.det();
        [
            (self.m22 * v[0] - self.m12 * v[1]) / det,
            (self.m11 * v[1] - self.m12 * v[0]) / det,
        ]
    }

    pub fn quad_inv(&self, v: [f64; 2]) -> f64 {
        let y = self.solve(v);
        v[0] * y[0] + v[1] * y[1]
    }
}

/// Active index set `I`, a non-empty subset of `{1, 2}`. Serialised as the
/// list of its (1-based) indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<u8>", try_from = "Vec<u8>")]
pub enum ActiveSet {
    Both,
    First,
    Second,
}

impl ActiveSet {
    /// Enumeration order used by the solver.
    pub const ALL: [ActiveSet; 3] = [ActiveSet::Both, ActiveSet::First, ActiveSet::Second];

    pub fn indices(self) -> &'static [u8] {
        match self {
            ActiveSet::Both => &[1, 2],
            ActiveSet::First => &[1],
            ActiveSet::Second => &[2],
        }
    }

    pub fn contains(self, index: u8) -> bool {
        self.indices().contains(&index)
    }
}

impl From<ActiveSet> for Vec<u8> {
    fn from(set: ActiveSet) -> Self {
        set.indices().to_vec()
    }
}

impl TryFrom<Vec<u8>> for ActiveSet {
    type Error = String;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        match v.as_slice() {
            [1, 2] => Ok(ActiveSet::Both),
            [1] => Ok(ActiveSet::First),
            [2] => Ok(ActiveSet::Second),
            other => Err(format!("not a non-empty subset of {{1, 2}}: {other:?}")),
        }
    }
}

impl std::fmt::Display for ActiveSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActiveSet::Both => f.write_str("{1,2}"),
            ActiveSet::First => f.write_str("{1}"),
            ActiveSet::Second => f.write_str("{2}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub solution: [f64; 2],
    pub active_set: ActiveSet,
    pub value: f64,
}

/// Slack allowed on the complement inequality `x_Ic >= b_Ic`, relative to
/// `max(1, |b_Ic|)`. The sign condition `M_II^-1 b_I > 0` is exact.
pub const COMPLEMENT_TOL: f64 = 1e-12;

fn complement_ok(x: f64, b: f64) -> bool {
    x - b >= -COMPLEMENT_TOL * b.abs().max(1.0)
}

/// Result of testing one candidate set against the optimality conditions.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    set: ActiveSet,
    solution: [f64; 2],
    value: f64,
    sign_ok: bool,
    complement_ok: bool,
}

impl Candidate {
    fn valid(&self) -> bool {
        self.sign_ok && self.complement_ok
    }
}

fn candidate(m: &CovarianceMatrix, b: [f64; 2], set: ActiveSet) -> Candidate {
    match set {
        ActiveSet::Both => {
            let y = m.solve(b);
            Candidate {
                set,
                solution: b,
                value: b[0] * y[0] + b[1] * y[1],
                sign_ok: y[0] > 0.0 && y[1] > 0.0,
                complement_ok: true,
            }
        }
        ActiveSet::First => {
            let y = b[0] / m.m11;
            let x2 = m.m12 * y;
            Candidate {
                set,
                solution: [b[0], x2],
                value: b[0] * y,
                sign_ok: y > 0.0,
                complement_ok: complement_ok(x2, b[1]),
            }
        }
        ActiveSet::Second => {
            let y = b[1] / m.m22;
            let x1 = m.m12 * y;
            Candidate {
                set,
                solution: [x1, b[1]],
                value: b[1] * y,
                sign_ok: y > 0.0,
                complement_ok: complement_ok(x1, b[0]),
            }
        }
    }
}

fn check_b(b: [f64; 2]) -> Result<(), QpError> {
    if !(b[0].is_finite() && b[1].is_finite()) {
        return Err(QpError::NonFiniteB(b[0], b[1]));
    }
    if b[0] <= 0.0 && b[1] <= 0.0 {
        return Err(QpError::InfeasibleB(b[0], b[1]));
    }
    Ok(())
}

/// Sets that satisfy every optimality condition. Exactly one in exact
/// arithmetic; floating point can admit two on a representation boundary,
/// where their values coincide.
pub fn validating_sets(m: &CovarianceMatrix, b: [f64; 2]) -> Result<Vec<ActiveSet>, QpError> {
    check_b(b)?;
    Ok(ActiveSet::ALL
        .iter()
        .map(|&set| candidate(m, b, set))
        .filter(Candidate::valid)
        .map(|c| c.set)
        .collect())
}

fn select(m: &CovarianceMatrix, b: [f64; 2]) -> Candidate {
    let all = ActiveSet::ALL.map(|set| candidate(m, b, set));

    #[cfg(debug_assertions)]
    {
        let valid: Vec<&Candidate> = all.iter().filter(|c| c.valid()).collect();
        if let [first, rest @ ..] = valid.as_slice() {
            for other in rest {
                debug_assert!(
                    (first.value - other.value).abs() <= 1e-9 * first.value.abs().max(1e-300),
                    "active sets {} and {} both validate with different values {} / {}",
                    first.set,
                    other.set,
                    first.value,
                    other.value
                );
            }
        }
    }

    if let Some(c) = all.iter().find(|c| c.valid()) {
        return *c;
    }
    // Rounding left no candidate fully valid. Every sign-valid candidate's
    // value is a lower bound of the optimum, so the largest is the answer.
    *all.iter()
        .filter(|c| c.sign_ok)
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("b outside (-inf, 0]^2 makes at least one single-index set sign-valid")
}

pub fn solve_qp(m: &CovarianceMatrix, b: [f64; 2]) -> Result<QpSolution, QpError> {
    check_b(b)?;
    let c = select(m, b);
    Ok(QpSolution { solution: c.solution, active_set: c.set, value: c.value })
}

/// Minimum value only; the hot path of the grid oracle.
pub fn min_value_only(m: &CovarianceMatrix, b: [f64; 2]) -> Result<f64, QpError> {
    check_b(b)?;
    Ok(select(m, b).value)
}

/// Largest violation of the KKT system of the problem at `sol`: primal
/// feasibility, multiplier signs on the active set, stationarity off it, and
/// the value identity. Scaled by the size of the gradient.
pub fn kkt_residual(m: &CovarianceMatrix, b: [f64; 2], sol: &QpSolution) -> f64 {
    let x = sol.solution;
    let grad = m.solve(x).map(|g| 2.0 * g);
    let scale = grad[0].abs().max(grad[1].abs()).max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let bscale = b[i].abs().max(1.0);
        worst = worst.max((b[i] - x[i]).max(0.0) / bscale);
        if sol.active_set.contains(i as u8 + 1) {
            worst = worst.max((-grad[i]).max(0.0) / scale);
            worst = worst.max((x[i] - b[i]).abs() / bscale);
        } else {
            worst = worst.max(grad[i].abs() / scale);
        }
    }
    let value = m.quad_inv(x);
    worst.max((value - sol.value).abs() / sol.value.abs().max(1.0))
}
