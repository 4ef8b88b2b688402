//! Self-verification suite.
//!
//! Each check cross-examines two independent computations (closed form
//! against the QP path, closed form against the grid oracle, the solver
//! against brute force) or asserts a structural property of `gamma`. Checks
//! are deterministic: all random instances come from a fixed seed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedform::{adjustment_coefficient, dominating_points, Minimizers};
use crate::model::{critical_values, f1, rho_hat_1, rho_hat_2, w1, ModelParams};
use crate::montecarlo::{simulate, SimConfig};
use crate::objective::{g2, g3, g_closed, g_qp};
use crate::oracle::{grid_minimize, OracleConfig};
use crate::qp::{kkt_residual, solve_qp, validating_sets, CovarianceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Closed-form objective used by [`dual_equality`]; swappable so a broken
/// implementation can be fed through the suite.
pub type ClosedObjective = fn(&ModelParams, f64, f64) -> f64;

fn closed_value(p: &ModelParams, t: f64, s: f64) -> f64 {
    g_closed(p, t, s).map(|v| v.value).unwrap_or(f64::NAN)
}

pub fn default_closed() -> ClosedObjective {
    closed_value
}

const SEED: u64 = 0x5eed_2d;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random model parameters: `mu1` log-uniform in `[0.2, 5]`, `mu2 / mu1` in
/// `[1, 10]`, `rho` uniform in `(-0.95, 0.95)`.
pub fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let mu1 = log_uniform(rng, 0.2, 5.0);
    let ratio = if rng.random_bool(0.1) { 1.0 } else { log_uniform(rng, 1.0, 10.0) };
    let rho = rng.random_range(-0.95..0.95);
    ModelParams::new(mu1, mu1 * ratio, rho).expect("sampled parameters are valid")
}

fn timed(name: &str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// `|g_qp - g_closed| / g_qp <= 1e-9` on random `(params, t, s)`.
pub fn dual_equality(samples: usize, closed: ClosedObjective) -> CheckOutcome {
    timed("dual_equality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut worst = (0.0_f64, None);
        for _ in 0..samples {
            let p = random_params(&mut rng);
            let t = log_uniform(&mut rng, 0.05, 20.0);
            // Every tenth sample sits on the diagonal, where the pieces meet.
            let s = if rng.random_bool(0.1) { t } else { log_uniform(&mut rng, 0.05, 20.0) };
            let q = g_qp(&p, t, s).expect("valid times");
            let rel = (q - closed(&p, t, s)).abs() / q;
            if !(rel <= worst.0) {
                worst = (if rel.is_nan() { f64::INFINITY } else { rel }, Some((p, t, s)));
            }
        }
        let passed = worst.0 <= 1e-9;
        let at = worst
            .1
            .map(|(p, t, s)| {
                format!(" at mu1={} mu2={} rho={} t={t} s={s}", p.mu1(), p.mu2(), p.rho())
            })
            .unwrap_or_default();
        (passed, format!("{samples} samples, max rel diff {:.3e}{at}", worst.0))
    })
}

/// Minimises `x' M^-1 x` over `x >= b` on a zooming grid.
pub fn brute_force_qp(m: &CovarianceMatrix, b: [f64; 2]) -> f64 {
    let scale = b[0].abs().max(b[1].abs());
    let cond = {
        let tr = m.m11() + m.m22();
        let disc = ((m.m11() - m.m22()).powi(2) + 4.0 * m.m12() * m.m12()).sqrt();
        (tr + disc) / (tr - disc)
    };
    let reach = 4.0 * scale * (1.0 + cond.sqrt());
    let mut lo = [b[0], b[1]];
    let mut hi = [b[0] + reach, b[1] + reach];
    let n = 201;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for _ in 0..10 {
        let h = [(hi[0] - lo[0]) / (n - 1) as f64, (hi[1] - lo[1]) / (n - 1) as f64];
        for i in 0..n {
            let x = lo[0] + h[0] * i as f64;
            for j in 0..n {
                let y = lo[1] + h[1] * j as f64;
                let v = m.quad_inv([x, y]);
                if v < best.0 {
                    best = (v, [x, y]);
                }
            }
        }
        for k in 0..2 {
            lo[k] = (best.1[k] - 4.0 * h[k]).max(b[k]);
            hi[k] = best.1[k] + 4.0 * h[k];
        }
    }
    best.0
}

pub fn random_qp_instance(rng: &mut ChaCha8Rng) -> (CovarianceMatrix, [f64; 2]) {
    let m11 = log_uniform(rng, 0.1, 10.0);
    let m22 = log_uniform(rng, 0.1, 10.0);
    let c = rng.random_range(-0.95..0.95);
    let m = CovarianceMatrix::new(m11, c * (m11 * m22).sqrt(), m22).expect("positive definite");
    loop {
        let b = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        if b[0] > 0.0 || b[1] > 0.0 {
            return (m, b);
        }
    }
}

/// Active-set contract on random positive-definite instances.
pub fn qp_contract(instances: usize, brute_force: usize) -> CheckOutcome {
    timed("qp_contract", || {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
        let mut not_unique = 0;
        let mut worst_kkt = 0.0_f64;
        let mut worst_brute = 0.0_f64;
        for k in 0..instances {
            let (m, b) = random_qp_instance(&mut rng);
            let sets = validating_sets(&m, b).expect("valid instance");
            if sets.len() != 1 {
                not_unique += 1;
            }
            let sol = solve_qp(&m, b).expect("valid instance");
            worst_kkt = worst_kkt.max(kkt_residual(&m, b, &sol));
            if k < brute_force {
                let brute = brute_force_qp(&m, b);
                worst_brute = worst_brute.max((brute - sol.value).abs() / sol.value.max(1e-300));
            }
        }
        let passed = not_unique == 0 && worst_kkt < 1e-10 && worst_brute <= 1e-6;
        (
            passed,
            format!(
                "{instances} instances, {not_unique} without a unique active set, \
                 max KKT residual {worst_kkt:.2e}, max brute-force rel gap {worst_brute:.2e} over {}",
                brute_force.min(instances)
            ),
        )
    })
}

/// `g3(f1(s), s) = g3(w1(s), s) = g2(s)` for `s >= s1*` whenever `rho > mu1 / mu2`.
pub fn boundary_identity(param_count: usize, s_per_param: usize) -> CheckOutcome {
    timed("boundary_identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
        let mut worst = 0.0_f64;
        for _ in 0..param_count {
            let mu1 = log_uniform(&mut rng, 0.3, 3.0);
            let mu2 = mu1 * log_uniform(&mut rng, 1.2, 10.0);
            let floor = mu1 / mu2;
            let rho = rng.random_range(floor + 0.02 * (0.98 - floor)..0.98);
            let p = ModelParams::new(mu1, mu2, rho).expect("valid parameters");
            let s1 = critical_values(&p).s1_star;
            for _ in 0..s_per_param {
                let s = s1 * log_uniform(&mut rng, 1.0, 100.0);
                let a = g3(&p, f1(&p, s), s);
                let b = g3(&p, w1(&p, s), s);
                let c = g2(&p, s);
                let rel = [(a - b).abs() / c, (a - c).abs() / c, (b - c).abs() / c]
                    .into_iter()
                    .fold(0.0, f64::max);
                worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
            }
        }
        (
            worst <= 1e-9,
            format!("{} points, max pairwise rel diff {worst:.3e}", param_count * s_per_param),
        )
    })
}

pub fn theorem_spot_values() -> CheckOutcome {
    timed("theorem_spot_values", || {
        let gamma = |a, b, r| dominating_points(&ModelParams::new(a, b, r).unwrap()).gamma;
        let g1 = gamma(1.0, 2.0, 0.9);
        let g2 = gamma(1.0, 1.0, 0.0);
        let g3 = gamma(1.0, 2.0, 0.5);
        let target = (3.0 + 2.0 * 3.0_f64.sqrt()) / 1.5;
        let p = ModelParams::new(1.0, 2.0, 0.5).unwrap();
        let oracle = grid_minimize(&p, &OracleConfig::default()).map(|r| r.min_value / 2.0);
        let oracle_gap = oracle.as_ref().map(|o| (o - target).abs() / target).unwrap_or(f64::INFINITY);
        let passed = g1 == 4.0 && g2 == 4.0 && (g3 - target).abs() <= 1e-12 && oracle_gap <= 1e-5;
        (
            passed,
            format!(
                "gamma(1,2,0.9) = {g1}, gamma(1,1,0) = {g2}, gamma(1,2,0.5) = {g3:.15} \
                 (target {target:.15}, oracle rel gap {oracle_gap:.2e})"
            ),
        )
    })
}

/// Continuity, strict decrease up to `rho_hat_2` and the `2 mu2` plateau.
pub fn gamma_shape(points: usize) -> CheckOutcome {
    timed("gamma_shape", || {
        let drifts = [(1.0, 1.0), (1.0, 2.0), (0.5, 1.5), (2.0, 3.0), (1.0, 10.0)];
        let mut problems = Vec::new();
        for (mu1, mu2) in drifts {
            if let Err(e) = gamma_shape_for(mu1, mu2, points) {
                problems.push(format!("({mu1},{mu2}): {e}"));
            }
        }
        let detail = if problems.is_empty() {
            format!("{} drift pairs x {points} rho samples", drifts.len())
        } else {
            problems.join("; ")
        };
        (problems.is_empty(), detail)
    })
}

/// Samples `gamma` on `points` evenly spaced `rho` in `(-1, 1)` and checks its shape.
pub fn gamma_shape_for(mu1: f64, mu2: f64, points: usize) -> Result<(), String> {
    let rho2 = rho_hat_2(mu1, mu2);
    let step = 2.0 / points as f64;
    let rhos: Vec<f64> = (0..points).map(|k| -1.0 + (k as f64 + 0.5) * step).collect();
    let mut gammas = Vec::with_capacity(points);
    for &rho in &rhos {
        let p = ModelParams::new(mu1, mu2, rho).map_err(|e| e.to_string())?;
        let g = dominating_points(&p).gamma;
        let direct = adjustment_coefficient(&p);
        if (g - direct).abs() > 1e-12 * g {
            return Err(format!("regime gamma {g} differs from direct formula {direct} at rho={rho}"));
        }
        if rho >= rho2 && g != 2.0 * mu2 {
            return Err(format!("gamma {g} off the plateau {} at rho={rho}", 2.0 * mu2));
        }
        gammas.push(g);
    }
    let diffs: Vec<f64> = gammas.windows(2).map(|w| w[1] - w[0]).collect();
    for (k, d) in diffs.iter().enumerate() {
        if rhos[k + 1] <= rho2 && *d >= 0.0 {
            return Err(format!("not strictly decreasing at rho={}", rhos[k + 1]));
        }
        let left = if k > 0 { diffs[k - 1].abs() } else { 0.0 };
        let right = diffs.get(k + 1).map_or(0.0, |d| d.abs());
        let local = left.max(right);
        if d.abs() > 10.0 * local + 1e-12 {
            return Err(format!(
                "jump {:.3e} at rho={} against local step {local:.3e}",
                d.abs(),
                rhos[k]
            ));
        }
    }
    Ok(())
}

/// `25` values of `rho` for one drift pair: the thresholds and points inside
/// every reachable regime, topped up with an even grid on `[-0.95, 0.97]`.
pub fn mesh_rhos(mu1: f64, mu2: f64) -> Vec<f64> {
    const COUNT: usize = 25;
    let r1 = rho_hat_1(mu1, mu2);
    let r2 = rho_hat_2(mu1, mu2);
    let mut special = vec![0.0];
    if r1 > 0.0 {
        special.extend([r1 / 2.0, r1]);
    }
    if r2 < 1.0 {
        special.extend([(r1 + r2) / 2.0, r2, (r2 + 1.0) / 2.0]);
    } else {
        special.push((r1 + 1.0) / 2.0);
    }
    let fill = COUNT - special.len();
    let mut rhos = special;
    for k in 0..fill {
        let mut rho = -0.95 + 1.92 * k as f64 / (fill - 1) as f64;
        while rhos.iter().any(|r| (r - rho).abs() < 1e-6) {
            rho += 1e-3;
        }
        rhos.push(rho);
    }
    rhos.sort_by(f64::total_cmp);
    rhos
}

/// The drift pairs and correlations of the oracle agreement mesh.
pub fn oracle_mesh(mu1_values: &[f64]) -> Vec<ModelParams> {
    let mut out = Vec::new();
    for &mu1 in mu1_values {
        for ratio in [1.0, 1.5, 3.0, 10.0] {
            let mu2 = mu1 * ratio;
            for rho in mesh_rhos(mu1, mu2) {
                out.push(ModelParams::new(mu1, mu2, rho).expect("mesh parameters are valid"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub params: ModelParams,
    pub rel_gap: f64,
    /// Distance from the oracle arg-min to the closed-form minimiser set.
    pub arg_distance: f64,
    pub unique: bool,
}

pub fn compare_with_oracle(p: &ModelParams, cfg: &OracleConfig) -> Result<OracleComparison, String> {
    let closed = dominating_points(p);
    let oracle = grid_minimize(p, cfg).map_err(|e| e.to_string())?;
    Ok(OracleComparison {
        params: *p,
        rel_gap: (oracle.min_value - closed.g_min).abs() / closed.g_min,
        arg_distance: closed.minimizers.distance(oracle.arg_min),
        unique: matches!(closed.minimizers, Minimizers::Unique { .. }),
    })
}

/// Closed-form `g_min` against the grid oracle on the parameter mesh.
pub fn oracle_agreement(mu1_values: &[f64]) -> CheckOutcome {
    timed("oracle_agreement", || {
        let cfg = OracleConfig::default();
        let mesh = oracle_mesh(mu1_values);
        let mut worst_gap = 0.0_f64;
        let mut worst_arg = 0.0_f64;
        let mut errors = Vec::new();
        for p in &mesh {
            match compare_with_oracle(p, &cfg) {
                Ok(c) => {
                    worst_gap = worst_gap.max(c.rel_gap);
                    if c.unique {
                        worst_arg = worst_arg.max(c.arg_distance);
                    }
                }
                Err(e) => errors.push(format!("({}, {}, {}): {e}", p.mu1(), p.mu2(), p.rho())),
            }
        }
        let passed = errors.is_empty() && worst_gap <= 1e-5 && worst_arg <= 1e-3;
        let mut detail = format!(
            "{} instances, max rel gap {worst_gap:.2e}, max arg-min distance {worst_arg:.2e}",
            mesh.len()
        );
        if !errors.is_empty() {
            detail.push_str(&format!(", oracle errors: {}", errors.join("; ")));
        }
        (passed, detail)
    })
}

/// Marginal ruin frequencies against `exp(-2 mu_i u)` within three standard errors.
pub fn mc_marginals() -> CheckOutcome {
    timed("mc_marginals", || {
        let p = ModelParams::new(1.0, 2.0, 0.5).unwrap();
        let n = 20_000;
        let cfg = SimConfig { bridge: true, ..SimConfig::new(0.5, n, 1e-3, SEED) };
        match simulate(&p, &cfg) {
            Ok(est) => {
                let mut ok = true;
                let mut parts = Vec::new();
                for (i, mu) in [p.mu1(), p.mu2()].into_iter().enumerate() {
                    let target = (-2.0 * mu * cfg.u).exp();
                    let freq = est.marginal_hits[i] as f64 / n as f64;
                    let se = (target * (1.0 - target) / n as f64).sqrt();
                    ok &= (freq - target).abs() <= 3.0 * se;
                    parts.push(format!("line {}: {freq:.4} vs {target:.4}", i + 1));
                }
                (ok, parts.join(", "))
            }
            Err(e) => (false, e.to_string()),
        }
    })
}

/// Equal seeds on pools of different sizes give identical estimates.
pub fn mc_determinism() -> CheckOutcome {
    timed("mc_determinism", || {
        let p = ModelParams::new(1.0, 1.5, 0.3).unwrap();
        let cfg = SimConfig::new(0.5, 4000, 5e-3, SEED);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| e.to_string())
                .and_then(|pool| pool.install(|| simulate(&p, &cfg)).map_err(|e| e.to_string()))
        };
        match (run(1), run(4)) {
            (Ok(a), Ok(b)) => {
                let same = a.p_hat.to_bits() == b.p_hat.to_bits()
                    && a.ci_halfwidth_95.to_bits() == b.ci_halfwidth_95.to_bits()
                    && a.sup_correlation.to_bits() == b.sup_correlation.to_bits()
                    && a.marginal_hits == b.marginal_hits;
                (same, format!("p_hat {} with 1 and 4 threads", a.p_hat))
            }
            (a, b) => (false, format!("{:?} / {:?}", a.err(), b.err())),
        }
    })
}

pub fn run_suite(mode: VerifyMode, closed: ClosedObjective) -> VerifyReport {
    let checks = match mode {
        VerifyMode::Quick => vec![
            dual_equality(100_000, closed),
            qp_contract(10_000, 100),
            boundary_identity(20, 50),
            theorem_spot_values(),
            gamma_shape(10_000),
            oracle_agreement(&[1.0]),
        ],
        VerifyMode::Full => vec![
            dual_equality(1_000_000, closed),
            qp_contract(100_000, 300),
            boundary_identity(200, 50),
            theorem_spot_values(),
            gamma_shape(100_000),
            oracle_agreement(&[0.5, 1.0, 2.0]),
            mc_marginals(),
            mc_determinism(),
        ],
    };
    VerifyReport { mode, checks }
}
