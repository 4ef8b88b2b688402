//! Path simulation of the two-line Brownian risk model.
//!
//! Each line's loss process `X_i(t) - mu_i t` is advanced with exact Gaussian
//! increments on a common grid. A line is ruined once its running maximum
//! exceeds `u`; the two ruin times may differ. A path is a joint hit when both
//! lines are ruined before the horizon.
//!
//! Random numbers come from ChaCha8 streams keyed by `(seed, unit index)`,
//! where a unit is one path or one antithetic pair. Work is split into
//! fixed-size chunks whose partial sums are combined in index order, so the
//! output is bit-identical for any thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended;
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

/// Steps per path above which a run is refused.
pub const MAX_STEPS: u64 = 2_000_000_000;

/// Units (paths or antithetic pairs) per work chunk. Fixed, so the reduction
/// order never depends on the thread pool.
const CHUNK: u64 = 512;

/// Bridge crossing probabilities below `exp(-2 * 20)` are treated as zero.
const BRIDGE_CUTOFF: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Initial capital of each line.
    pub u: f64,
    pub n_paths: u64,
    pub dt: f64,
    /// Horizon `T = horizon_multiplier * u / mu1`.
    pub horizon_multiplier: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Also count crossings between grid nodes, drawn from the Brownian
    /// bridge law `exp(-2 (u - y0)(u - y1) / dt)`. Removes the
    /// discretisation bias of each marginal.
    #[serde(default)]
    pub bridge: bool,
    /// Fixed horizon overriding `horizon_multiplier`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Gaussian increments per monitoring step. The maxima are only observed
    /// every `dt`, but the path is generated on the finer grid `dt / substeps`.
    /// Runs with equal `dt / substeps` and seed share their paths, so a
    /// coarser monitoring grid sees a subset of the crossings of a finer one.
    #[serde(default = "one")]
    pub substeps: u32,
    /// Importance sampling. Line 2 runs with reversed drift until it first
    /// exceeds `u` on the generation grid, line 1 taking the correlated share
    /// of the shift, and the path is weighted by the likelihood ratio
    /// `exp(-2 mu2 Y2)` read at that point. The tilt ignores the monitoring
    /// grid, so coupled runs share paths and weights. Unbiased for any parameters; the variance is small when the
    /// joint tail is governed by line 2, i.e. when `gamma = 2 mu2`.
    #[serde(default)]
    pub tilt: bool,
}

fn one() -> u32 {
    1
}

impl SimConfig {
    pub fn new(u: f64, n_paths: u64, dt: f64, seed: u64) -> Self {
        SimConfig {
            u,
            n_paths,
            dt,
            horizon_multiplier: 10.0,
            seed,
            antithetic: true,
            bridge: false,
            horizon: None,
            substeps: 1,
            tilt: false,
        }
    }

    pub fn horizon_for(&self, p: &ModelParams) -> f64 {
        self.horizon.unwrap_or(self.horizon_multiplier * self.u / p.mu1())
    }

    /// Monitoring steps per path. The ratio is nudged down before rounding so
    /// that horizons which are exact multiples of `dt` in decimal do not gain
    /// a step from representation error.
    pub fn steps_for(&self, p: &ModelParams) -> u64 {
        (self.horizon_for(p) / self.dt * (1.0 - 1e-12)).ceil() as u64
    }

    pub fn validate(&self, p: &ModelParams) -> Result<(), McError> {
        let fail = |msg: String| Err(McError::Config(msg));
        if !(self.u.is_finite() && self.u > 0.0) {
            return fail(format!("u must be positive, got {}", self.u));
        }
        if self.n_paths < 100 {
            return fail(format!("n_paths must be >= 100, got {}", self.n_paths));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return fail(format!("antithetic sampling needs an even n_paths, got {}", self.n_paths));
        }
        if !(self.dt > 0.0 && self.dt <= self.u / 100.0) {
            return fail(format!("dt must lie in (0, u/100] = (0, {}], got {}", self.u / 100.0, self.dt));
        }
        if !(self.horizon_multiplier.is_finite() && self.horizon_multiplier > 0.0) {
            return fail(format!("horizon_multiplier must be positive, got {}", self.horizon_multiplier));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return fail(format!("horizon must be positive, got {h}"));
            }
        }
        if self.substeps == 0 {
            return fail("substeps must be at least 1".into());
        }
        let steps = self.horizon_for(p) / self.dt * self.substeps as f64;
        if !(steps.is_finite() && steps <= MAX_STEPS as f64) {
            return fail(format!("{steps:.3e} steps per path exceeds the limit {MAX_STEPS}"));
        }
        Ok(())
    }
}

/// Hit counts are taken under the sampling measure. Without tilting
/// `p_hat = n_joint_hits / n_paths`; with it `p_hat` is the mean weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    /// Normal-approximation half-width; antithetic pairs are treated as one
    /// observation.
    pub ci_halfwidth_95: f64,
    /// `-ln(p_hat) / u`, `NaN` when no path was a joint hit.
    #[serde(with = "extended")]
    pub log_slope: f64,
    pub n_joint_hits: u64,
    pub marginal_hits: [u64; 2],
    pub n_paths: u64,
    /// Sample correlation of the running maxima capped at `u`. Informational.
    #[serde(with = "extended")]
    pub sup_correlation: f64,
    /// `exp(-2 mu2 u)` times the fraction of line-2 ruins that are joint.
    /// The exact supremum law of line 2 replaces its noisy sample estimate;
    /// `NaN` when line 2 was never ruined.
    #[serde(with = "extended")]
    pub p_hat_conditional: f64,
}

impl McEstimate {
    pub fn has_hits(&self) -> bool {
        self.n_joint_hits > 0
    }
}

struct Engine {
    drift: [f64; 2],
    /// Standard deviation of one substep increment.
    sqrt_h: f64,
    substeps: u32,
    dt: f64,
    /// Per-substep drift added to each line while line 2 is tilted.
    tilt: Option<[f64; 2]>,
    /// `2 mu2`.
    theta: f64,
    /// Drift of line 2 over one substep.
    drift_h2: f64,
    rho: f64,
    rho_c: f64,
    u: f64,
    steps: u64,
    bridge: bool,
    seed: u64,
    members: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct PathOutcome {
    hit: [bool; 2],
    max: [f64; 2],
    /// Likelihood ratio of the path; 1 when untilted.
    weight: f64,
}

impl Engine {
    fn new(p: &ModelParams, cfg: &SimConfig) -> Self {
        Engine {
            drift: [p.mu1() * cfg.dt, p.mu2() * cfg.dt],
            sqrt_h: (cfg.dt / cfg.substeps as f64).sqrt(),
            substeps: cfg.substeps,
            dt: cfg.dt,
            tilt: cfg.tilt.then(|| {
                let theta = 2.0 * p.mu2() * cfg.dt / cfg.substeps as f64;
                [p.rho() * theta, theta]
            }),
            theta: 2.0 * p.mu2(),
            drift_h2: p.mu2() * cfg.dt / cfg.substeps as f64,
            rho: p.rho(),
            rho_c: (1.0 - p.rho() * p.rho()).sqrt(),
            u: cfg.u,
            steps: cfg.steps_for(p),
            bridge: cfg.bridge,
            seed: cfg.seed,
            members: if cfg.antithetic { 2 } else { 1 },
        }
    }

    fn units(&self, n_paths: u64) -> u64 {
        n_paths / self.members as u64
    }

    /// Uniform draw for (step, member, line), read by random access so the
    /// normal stream is never disturbed.
    fn bridge_uniform(rng: &mut ChaCha8Rng, step: u64, member: usize, line: usize) -> f64 {
        let slot = 4 * step as u128 + 2 * member as u128 + line as u128;
        rng.set_word_pos(2 * slot);
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn run_unit(&self, unit: u64) -> [PathOutcome; 2] {
        let mut normals = ChaCha8Rng::seed_from_u64(self.seed);
        normals.set_stream(2 * unit);
        let mut uniforms = ChaCha8Rng::seed_from_u64(self.seed);
        uniforms.set_stream(2 * unit + 1);

        let mut y = [[0.0_f64; 2]; 2];
        let mut out = [PathOutcome { weight: 1.0, ..PathOutcome::default() }; 2];
        let mut remaining = 2 * self.members;
        let u = self.u;
        // Line 2 on the generation grid, advanced only while tilted.
        let mut fine2 = [0.0_f64; 2];
        let mut tilting = [self.tilt.is_some(); 2];

        for step in 0..self.steps {
            let mut dx = [0.0_f64; 2];
            let mut shift = [[0.0_f64; 2]; 2];
            for _ in 0..self.substeps {
                let z1: f64 = normals.sample(StandardNormal);
                let z2: f64 = normals.sample(StandardNormal);
                let w = [self.sqrt_h * z1, self.sqrt_h * (self.rho * z1 + self.rho_c * z2)];
                dx[0] += w[0];
                dx[1] += w[1];
                if let Some(tilt) = self.tilt {
                    for m in 0..self.members {
                        if tilting[m] {
                            let sign = if m == 0 { 1.0 } else { -1.0 };
                            shift[m][0] += tilt[0];
                            shift[m][1] += tilt[1];
                            fine2[m] += sign * w[1] + tilt[1] - self.drift_h2;
                            tilting[m] = fine2[m] <= u;
                        }
                    }
                }
            }
            for m in 0..self.members {
                let sign = if m == 0 { 1.0 } else { -1.0 };
                for i in 0..2 {
                    let y0 = y[m][i];
                    let y1 = y0 + sign * dx[i] - self.drift[i] + shift[m][i];
                    y[m][i] = y1;
                    let o = &mut out[m];
                    if y1 > o.max[i] {
                        o.max[i] = y1;
                    }
                    if o.hit[i] {
                        continue;
                    }
                    let crossed = if y1 > u {
                        true
                    } else if self.bridge {
                        let gap = (u - y0) * (u - y1);
                        gap < BRIDGE_CUTOFF * self.dt
                            && Self::bridge_uniform(&mut uniforms, step, m, i)
                                < (-2.0 * gap / self.dt).exp()
                    } else {
                        false
                    };
                    if crossed {
                        o.hit[i] = true;
                        remaining -= 1;
                    }
                }
            }
            if remaining == 0 {
                break;
            }
        }
        if self.tilt.is_some() {
            // While tilted the likelihood ratio is exp(-2 mu2 Y2), so this
            // also covers paths stopped before line 2 crossed.
            for m in 0..self.members {
                out[m].weight = (-self.theta * fine2[m]).exp();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    joint: u64,
    marginal: [u64; 2],
    /// Sum over units of the unit mean of the weighted joint indicator, and
    /// of its square.
    unit_mean: f64,
    unit_mean_sq: f64,
    sum: [f64; 2],
    sum_sq: [f64; 2],
    sum_cross: f64,
}

impl Partial {
    fn add(&mut self, o: &Partial) {
        self.joint += o.joint;
        for i in 0..2 {
            self.marginal[i] += o.marginal[i];
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
        }
        self.sum_cross += o.sum_cross;
        self.unit_mean += o.unit_mean;
        self.unit_mean_sq += o.unit_mean_sq;
    }
}

fn chunk_ranges(units: u64) -> Vec<(u64, u64)> {
    (0..units.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(units)))
        .collect()
}

/// Estimates `P(sup (X1 - mu1 t) > u, sup (X2 - mu2 s) > u)` on `[0, T]`.
pub fn simulate(p: &ModelParams, cfg: &SimConfig) -> Result<McEstimate, McError> {
    cfg.validate(p)?;
    let engine = Engine::new(p, cfg);
    let units = engine.units(cfg.n_paths);
    let u = cfg.u;

    let partials: Vec<Partial> = chunk_ranges(units)
        .into_par_iter()
        .map(|(from, to)| {
            let mut acc = Partial::default();
            for unit in from..to {
                let outcomes = engine.run_unit(unit);
                let mut weighted = 0.0;
                for o in &outcomes[..engine.members] {
                    if o.hit[0] && o.hit[1] {
                        acc.joint += 1;
                        weighted += o.weight;
                    }
                    let capped = [o.max[0].min(u), o.max[1].min(u)];
                    for i in 0..2 {
                        acc.marginal[i] += o.hit[i] as u64;
                        acc.sum[i] += capped[i];
                        acc.sum_sq[i] += capped[i] * capped[i];
                    }
                    acc.sum_cross += capped[0] * capped[1];
                }
                let mean = weighted / engine.members as f64;
                acc.unit_mean += mean;
                acc.unit_mean_sq += mean * mean;
            }
            acc
        })
        .collect();

    let mut total = Partial::default();
    for part in &partials {
        total.add(part);
    }

    let n = cfg.n_paths as f64;
    let k = units as f64;
    let p_hat = if cfg.tilt { total.unit_mean / k } else { total.joint as f64 / n };
    let var_unit = ((total.unit_mean_sq - k * p_hat * p_hat) / (k - 1.0)).max(0.0);
    let ci_halfwidth_95 = 1.96 * (var_unit / k).sqrt();

    let mean = [total.sum[0] / n, total.sum[1] / n];
    let var = [
        total.sum_sq[0] / n - mean[0] * mean[0],
        total.sum_sq[1] / n - mean[1] * mean[1],
    ];
    let cov = total.sum_cross / n - mean[0] * mean[1];
    let sup_correlation = if !cfg.tilt && var[0] > 0.0 && var[1] > 0.0 {
        cov / (var[0] * var[1]).sqrt()
    } else {
        f64::NAN
    };

    let p_hat_conditional = if !cfg.tilt && total.marginal[1] > 0 {
        (-2.0 * p.mu2() * u).exp() * total.joint as f64 / total.marginal[1] as f64
    } else {
        f64::NAN
    };

    Ok(McEstimate {
        p_hat,
        p_hat_conditional,
        ci_halfwidth_95,
        log_slope: if total.joint > 0 { -p_hat.ln() / u } else { f64::NAN },
        n_joint_hits: total.joint,
        marginal_hits: total.marginal,
        n_paths: cfg.n_paths,
        sup_correlation,
    })
}

/// Per-path running maxima on the grid, in path order. Paths stop once both
/// lines are ruined, so values above `u` are lower bounds of the true maximum.
pub fn sup_samples(p: &ModelParams, cfg: &SimConfig) -> Result<Vec<[f64; 2]>, McError> {
    cfg.validate(p)?;
    if cfg.tilt {
        return Err(McError::Config("supremum samples need the untilted measure".into()));
    }
    let engine = Engine::new(p, cfg);
    let units = engine.units(cfg.n_paths);
    let chunks: Vec<Vec<[f64; 2]>> = chunk_ranges(units)
        .into_par_iter()
        .map(|(from, to)| {
            let mut v = Vec::with_capacity(((to - from) as usize) * engine.members);
            for unit in from..to {
                let outcomes = engine.run_unit(unit);
                v.extend(outcomes[..engine.members].iter().map(|o| o.max));
            }
            v
        })
        .collect();
    Ok(chunks.concat())
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// `Exp(rate)`, compared on `[0, upto]` only.
pub fn ks_exponential(samples: &[f64], rate: f64, upto: f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() };
    let mut d: f64 = 0.0;
    let mut below = 0usize;
    for (i, &x) in xs.iter().enumerate() {
        if x > upto {
            break;
        }
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
        below = i + 1;
    }
    d.max((cdf(upto) - below as f64 / n).abs())
}

/// How seeds are assigned along a ladder of capital levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Rung `k` uses `seed + k`.
    #[default]
    PerRung,
    /// Every rung reuses `seed` and the horizon of the top rung (common
    /// random numbers); `p_hat` is then non-increasing in `u` path by path.
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub u: f64,
    pub estimate: McEstimate,
}

pub fn slope_ladder(
    p: &ModelParams,
    u_values: &[f64],
    base: &SimConfig,
    policy: SeedPolicy,
) -> Result<Vec<LadderRung>, McError> {
    let Some(&top) = u_values.last() else {
        return Err(McError::Config("u ladder is empty".into()));
    };
    if u_values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(McError::Config(format!("u ladder must be strictly ascending: {u_values:?}")));
    }
    let common_horizon = base
        .horizon
        .unwrap_or(base.horizon_multiplier * top / p.mu1());
    u_values
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let cfg = match policy {
                SeedPolicy::PerRung => SimConfig {
                    u,
                    seed: base.seed.wrapping_add(k as u64),
                    ..*base
                },
                SeedPolicy::Common => SimConfig { u, horizon: Some(common_horizon), ..*base },
            };
            Ok(LadderRung { u, estimate: simulate(p, &cfg)? })
        })
        .collect()
}

/// Least-squares slope of `-ln p_hat` against `u` over rungs with hits.
pub fn fitted_slope(rungs: &[LadderRung]) -> Option<f64> {
    slope_of(rungs, |e| e.p_hat)
}

/// As [`fitted_slope`], on [`McEstimate::p_hat_conditional`].
pub fn fitted_slope_conditional(rungs: &[LadderRung]) -> Option<f64> {
    slope_of(rungs, |e| e.p_hat_conditional)
}

fn slope_of(rungs: &[LadderRung], pick: impl Fn(&McEstimate) -> f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rungs
        .iter()
        .filter(|r| r.estimate.has_hits())
        .map(|r| (r.u, -pick(&r.estimate).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
