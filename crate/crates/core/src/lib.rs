//! Logarithmic asymptotics of joint ruin for two correlated Brownian risk lines.
//!
//! The adjustment coefficient is half the minimum of a two-layer objective
//! `g(t, s)`. This crate computes it in closed form ([`closedform`]), checks
//! it against a QP-based grid search ([`oracle`]) and estimates the underlying
//! probability by simulation ([`montecarlo`]).

pub mod closedform;
pub mod extended;
pub mod model;
pub mod montecarlo;
pub mod objective;
pub mod oracle;
pub mod qp;
pub mod verify;

pub use closedform::{adjustment_coefficient, classify_regime, dominating_points, AsymptoticsResult, Minimizers, Regime};
pub use model::{critical_values, CriticalValues, ModelError, ModelParams, Piece, Region, Side};
pub use montecarlo::{simulate, slope_ladder, LadderRung, McError, McEstimate, SeedPolicy, SimConfig};
pub use objective::{g_closed, g_qp, ObjectiveError, ObjectiveValue, Representation};
pub use oracle::{grid_minimize, OracleConfig, OracleError, OracleResult};
pub use qp::{solve_qp, ActiveSet, CovarianceMatrix, QpError, QpSolution};
