use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ruin2d_core::closedform::{dominating_points, Minimizers};
use ruin2d_core::model::{critical_values, ModelParams};
use ruin2d_core::montecarlo::{fitted_slope, fitted_slope_conditional, simulate, slope_ladder, SeedPolicy, SimConfig};
use ruin2d_core::oracle::{grid_minimize, OracleConfig};
use ruin2d_core::qp::{kkt_residual, solve_qp, validating_sets, CovarianceMatrix};
use ruin2d_core::verify::{default_closed, run_suite, VerifyMode};

use crate::record::{
    num, CsvTable, GammaReport, LadderReport, OracleReport, Payload, QpReport, RunRecord,
    SimulationReport, SweepRow,
};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ruin2d", version, about = "Joint ruin asymptotics for two correlated Brownian risk lines")]
pub struct Cli {
    /// Emit the JSON run record instead of a table.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Emit CSV instead of a table.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Flat JSON file of defaults; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime, adjustment coefficient and dominating point(s).
    Gamma(ModelArgs),
    /// Adjustment coefficient over an even grid of correlations.
    Sweep(SweepArgs),
    /// Brute-force grid minimum of g, compared with the closed form.
    Oracle(OracleArgs),
    /// Solve min x' M^-1 x subject to x >= b.
    Qp(QpArgs),
    /// Monte Carlo estimate of the joint ruin probability.
    Simulate(SimulateArgs),
    /// Monte Carlo estimates over a ladder of capital levels.
    Ladder(LadderArgs),
    /// Run the internal consistency suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DriftArgs {
    #[arg(long)]
    pub mu1: f64,
    #[arg(long)]
    pub mu2: f64,
    /// Swap the drifts if they are given in decreasing order.
    #[arg(long)]
    pub sort: bool,
}

impl DriftArgs {
    fn params(&self, rho: f64) -> Result<ModelParams, CliError> {
        Ok(if self.sort {
            ModelParams::sorted(self.mu1, self.mu2, rho)?
        } else {
            ModelParams::new(self.mu1, self.mu2, rho)?
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub drifts: DriftArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        self.drifts.params(self.rho)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub drifts: DriftArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rho_to: f64,
    #[arg(long)]
    pub steps: usize,
    /// Write the CSV table to this file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Largest acceptable relative gap to the closed-form minimum.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = OracleConfig::default().initial_grid)]
    pub grid: usize,
    #[arg(long, default_value_t = OracleConfig::default().refinement_rounds)]
    pub rounds: usize,
    #[arg(long, default_value_t = OracleConfig::default().zoom_factor)]
    pub zoom: f64,
    #[arg(long, default_value_t = OracleConfig::default().t_max_multiplier)]
    pub box_multiplier: f64,
}

#[derive(Debug, Clone, Args)]
pub struct QpArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub m11: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub m12: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub m22: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b2: f64,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 10.0)]
    pub horizon_multiplier: f64,
    /// Fixed horizon, overriding the multiplier.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plain independent paths instead of antithetic pairs.
    #[arg(long)]
    pub no_antithetic: bool,
    /// Count crossings between grid nodes via the Brownian bridge.
    #[arg(long)]
    pub bridge: bool,
    /// Gaussian increments per monitoring step.
    #[arg(long, default_value_t = 1)]
    pub substeps: u32,
    /// Importance sampling: tilt line 2 towards ruin and reweight.
    #[arg(long)]
    pub tilt: bool,
}

impl McArgs {
    fn config(&self, u: f64) -> SimConfig {
        SimConfig {
            u,
            n_paths: self.n_paths,
            dt: self.dt,
            horizon_multiplier: self.horizon_multiplier,
            seed: self.seed,
            antithetic: !self.no_antithetic,
            bridge: self.bridge,
            horizon: self.horizon,
            substeps: self.substeps,
            tilt: self.tilt,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub u: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LadderArgs {
    #[command(flatten)]
    pub mc: McArgs,
    /// Ascending capital levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub u_values: Vec<f64>,
    /// Reuse one seed and one horizon on every rung.
    #[arg(long)]
    pub common_seed: bool,
    /// Write the CSV table to this file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Reduced suite (default).
    #[arg(long, conflicts_with = "full")]
    pub quick: bool,
    /// Complete suite including Monte Carlo checks.
    #[arg(long)]
    pub full: bool,
}

/// Everything a command produced, ready to print.
#[derive(Debug)]
pub struct Outcome {
    pub record: RunRecord,
    pub table: String,
    pub csv: Option<CsvTable>,
    /// Write `csv` here instead of stdout.
    pub csv_file: Option<PathBuf>,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(record: RunRecord, table: String, csv: Option<CsvTable>) -> Self {
        Outcome { record, table, csv, csv_file: None, exit_code: 0 }
    }
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Gamma(a) => gamma(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Qp(a) => qp(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Ladder(a) => ladder(a),
        Command::Verify(a) => verify(a),
    }
}

fn describe_minimizers(m: &Minimizers) -> String {
    match *m {
        Minimizers::Unique { point } => format!("({}, {})", point.0, point.1),
        Minimizers::Pair { first, second } => {
            format!("({}, {}) and ({}, {})", first.0, first.1, second.0, second.1)
        }
        Minimizers::Segment { s, t_from, t_to, .. } => {
            format!("s = {s}, t in [{t_from}, {t_to}]")
        }
    }
}

fn gamma(a: &ModelArgs) -> Result<Outcome, CliError> {
    let p = a.params()?;
    let res = dominating_points(&p);
    let cv = critical_values(&p);
    let mut table = String::new();
    let _ = writeln!(table, "regime      {}", res.regime);
    let _ = writeln!(table, "gamma       {}", res.gamma);
    let _ = writeln!(table, "g_min       {}", res.g_min);
    let _ = writeln!(table, "minimizer   {}", describe_minimizers(&res.minimizers));
    let _ = writeln!(table, "rho_hat_1   {}", cv.rho_hat_1);
    let _ = writeln!(table, "rho_hat_2   {}", cv.rho_hat_2);
    let (t0, s0) = res.minimizers.representative();
    let mut csv = CsvTable::new(&["rho", "regime", "gamma", "g_min", "t0_t", "t0_s"]);
    csv.push(vec![num(p.rho()), res.regime.to_string(), num(res.gamma), num(res.g_min), num(t0), num(s0)]);
    let record = RunRecord::new(
        "gamma",
        Some(p),
        Payload::Asymptotics(GammaReport { asymptotics: res, critical_values: cv }),
        None,
    );
    Ok(Outcome::ok(record, table, Some(csv)))
}

/// `steps` values from `from` to `to` inclusive; a single step gives `from`.
pub fn rho_grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(from.is_finite() && to.is_finite()) || to <= from {
        return Err(CliError::Usage(format!("need rho-from < rho-to, got {from} and {to}")));
    }
    if steps == 0 {
        return Err(CliError::Usage("steps must be at least 1".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let n = (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| (from * (n - k as f64) + to * k as f64) / n)
        .collect())
}

fn sweep(a: &SweepArgs) -> Result<Outcome, CliError> {
    let rhos = rho_grid(a.rho_from, a.rho_to, a.steps)?;
    let first = a.drifts.params(rhos[0])?;
    let mut rows = Vec::with_capacity(rhos.len());
    let mut csv = CsvTable::new(&["rho", "regime", "gamma", "g_min", "t0_t", "t0_s"]);
    let mut table = format!("{:>10}  {:<16} {:>12} {:>12} {:>10} {:>10}\n", "rho", "regime", "gamma", "g_min", "t0_t", "t0_s");
    for rho in rhos {
        let p = a.drifts.params(rho)?;
        let res = dominating_points(&p);
        let (t0, s0) = res.minimizers.representative();
        let row = SweepRow {
            rho,
            regime: res.regime.to_string(),
            gamma: res.gamma,
            g_min: res.g_min,
            t0_t: t0,
            t0_s: s0,
        };
        let _ = writeln!(
            table,
            "{:>10.6}  {:<16} {:>12.8} {:>12.8} {:>10.6} {:>10.6}",
            rho, row.regime, row.gamma, row.g_min, t0, s0
        );
        csv.push(vec![num(rho), row.regime.clone(), num(row.gamma), num(row.g_min), num(t0), num(s0)]);
        rows.push(row);
    }
    let record = RunRecord::new("sweep", Some(first), Payload::Sweep(rows), None);
    let mut out = Outcome::ok(record, table, Some(csv));
    out.csv_file = a.out.clone();
    Ok(out)
}

fn oracle(a: &OracleArgs) -> Result<Outcome, CliError> {
    let p = a.model.params()?;
    let cfg = OracleConfig {
        t_max_multiplier: a.box_multiplier,
        initial_grid: a.grid,
        refinement_rounds: a.rounds,
        zoom_factor: a.zoom,
    };
    if !(a.tol >= 0.0) {
        return Err(CliError::Usage(format!("tol must be non-negative, got {}", a.tol)));
    }
    let closed = dominating_points(&p);
    let res = grid_minimize(&p, &cfg)?;
    let rel_gap = (res.min_value - closed.g_min).abs() / closed.g_min;
    let arg_min_distance = closed.minimizers.distance(res.arg_min);
    let mut table = String::new();
    let _ = writeln!(table, "oracle arg_min   ({}, {})", res.arg_min.0, res.arg_min.1);
    let _ = writeln!(table, "oracle min       {}", res.min_value);
    let _ = writeln!(table, "closed-form min  {}", closed.g_min);
    let _ = writeln!(table, "relative gap     {rel_gap:.3e} (tol {:.1e})", a.tol);
    let _ = writeln!(table, "arg_min distance {arg_min_distance:.3e}");
    let _ = writeln!(table, "evaluations      {}", res.evaluations);
    let mut csv = CsvTable::new(&["t", "s", "min_value", "closed_g_min", "rel_gap", "arg_min_distance"]);
    csv.push(vec![
        num(res.arg_min.0),
        num(res.arg_min.1),
        num(res.min_value),
        num(closed.g_min),
        num(rel_gap),
        num(arg_min_distance),
    ]);
    let exit_code = if rel_gap > a.tol { 4 } else { 0 };
    let report = OracleReport {
        oracle: res,
        closed_form_g_min: closed.g_min,
        rel_gap,
        arg_min_distance,
        tol: a.tol,
    };
    let record = RunRecord::new("oracle", Some(p), Payload::Oracle(report), None);
    Ok(Outcome { exit_code, ..Outcome::ok(record, table, Some(csv)) })
}

fn qp(a: &QpArgs) -> Result<Outcome, CliError> {
    let m = CovarianceMatrix::new(a.m11, a.m12, a.m22)?;
    let b = [a.b1, a.b2];
    let solution = solve_qp(&m, b)?;
    let sets = validating_sets(&m, b)?;
    let kkt = kkt_residual(&m, b, &solution);
    let mut table = String::new();
    let _ = writeln!(table, "solution    ({}, {})", solution.solution[0], solution.solution[1]);
    let _ = writeln!(table, "active set  {}", solution.active_set);
    let _ = writeln!(table, "value       {}", solution.value);
    let _ = writeln!(table, "KKT resid.  {kkt:.3e}");
    let mut csv = CsvTable::new(&["x1", "x2", "active_set", "value"]);
    csv.push(vec![
        num(solution.solution[0]),
        num(solution.solution[1]),
        solution.active_set.to_string(),
        num(solution.value),
    ]);
    let report = QpReport { solution, validating_sets: sets, kkt_residual: kkt };
    Ok(Outcome::ok(RunRecord::new("qp", None, Payload::Qp(report), None), table, Some(csv)))
}

const MC_HEADER: &[&str] = &["u", "p_hat", "ci_halfwidth_95", "log_slope", "n_joint_hits", "marginal_hits_1", "marginal_hits_2", "n_paths"];

fn mc_row(u: f64, e: &ruin2d_core::McEstimate) -> Vec<String> {
    vec![
        num(u),
        num(e.p_hat),
        num(e.ci_halfwidth_95),
        num(e.log_slope),
        e.n_joint_hits.to_string(),
        e.marginal_hits[0].to_string(),
        e.marginal_hits[1].to_string(),
        e.n_paths.to_string(),
    ]
}

fn mc_line(u: f64, e: &ruin2d_core::McEstimate) -> String {
    format!(
        "{:>8}  {:>12.6e}  {:>10.3e}  {:>9.4}  {:>8}  {:>8} {:>8}",
        u, e.p_hat, e.ci_halfwidth_95, e.log_slope, e.n_joint_hits, e.marginal_hits[0], e.marginal_hits[1]
    )
}

fn mc_table_header() -> String {
    format!(
        "{:>8}  {:>12}  {:>10}  {:>9}  {:>8}  {:>17}\n",
        "u", "p_hat", "ci95", "log_slope", "joint", "marginal hits"
    )
}

fn simulate_cmd(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let p = a.mc.model.params()?;
    let cfg = a.mc.config(a.u);
    let estimate = simulate(&p, &cfg)?;
    let mut table = mc_table_header();
    let _ = writeln!(table, "{}", mc_line(a.u, &estimate));
    if !estimate.has_hits() {
        let _ = writeln!(table, "no joint hits: log_slope undefined");
    }
    let _ = writeln!(table, "sup correlation (informational): {:.4}", estimate.sup_correlation);
    let mut csv = CsvTable::new(MC_HEADER);
    csv.push(mc_row(a.u, &estimate));
    let record = RunRecord::new(
        "simulate",
        Some(p),
        Payload::Simulation(SimulationReport { config: cfg, estimate }),
        Some(cfg.seed),
    );
    Ok(Outcome::ok(record, table, Some(csv)))
}

fn ladder(a: &LadderArgs) -> Result<Outcome, CliError> {
    let p = a.mc.model.params()?;
    let base = a.mc.config(a.u_values.first().copied().unwrap_or(f64::NAN));
    let policy = if a.common_seed { SeedPolicy::Common } else { SeedPolicy::PerRung };
    let rungs = slope_ladder(&p, &a.u_values, &base, policy)?;
    let slope = fitted_slope(&rungs).unwrap_or(f64::NAN);
    let slope_conditional = fitted_slope_conditional(&rungs).unwrap_or(f64::NAN);
    let mut table = mc_table_header();
    let mut csv = CsvTable::new(MC_HEADER);
    for r in &rungs {
        let _ = writeln!(table, "{}", mc_line(r.u, &r.estimate));
        csv.push(mc_row(r.u, &r.estimate));
    }
    let _ = writeln!(table, "fitted slope of -ln p_hat vs u: {slope:.4}");
    let _ = writeln!(table, "same, conditional estimator:    {slope_conditional:.4}");
    let report = LadderReport {
        config: base,
        common_seed: a.common_seed,
        rungs,
        fitted_slope: slope,
        fitted_slope_conditional: slope_conditional,
    };
    let record = RunRecord::new("ladder", Some(p), Payload::Ladder(report), Some(base.seed));
    let mut out = Outcome::ok(record, table, Some(csv));
    out.csv_file = a.out.clone();
    Ok(out)
}

fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let mode = if a.full { VerifyMode::Full } else { VerifyMode::Quick };
    let report = run_suite(mode, default_closed());
    let mut table = format!("{:<22} {:<6} {:>8}  detail\n", "check", "result", "seconds");
    let mut csv = CsvTable::new(&["check", "passed", "seconds", "detail"]);
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(table, "{:<22} {:<6} {:>8.2}  {}", c.name, verdict, c.seconds, c.detail);
        csv.push(vec![c.name.clone(), c.passed.to_string(), format!("{:.3}", c.seconds), c.detail.clone()]);
    }
    let exit_code = if report.all_passed() {
        0
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        let _ = writeln!(table, "FAILED: {}", names.join(", "));
        1
    };
    let record = RunRecord::new("verify", None, Payload::Verify(report), None);
    Ok(Outcome { exit_code, ..Outcome::ok(record, table, Some(csv)) })
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomically(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    let io = |source| CliError::Io { context: format!("writing {}", path.display()), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
