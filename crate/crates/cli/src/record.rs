//! The JSON envelope shared by every subcommand, and CSV tables.

use serde::{Deserialize, Serialize};

use ruin2d_core::closedform::AsymptoticsResult;
use ruin2d_core::extended;
use ruin2d_core::model::{CriticalValues, ModelParams};
use ruin2d_core::montecarlo::{LadderRung, McEstimate, SimConfig};
use ruin2d_core::oracle::OracleResult;
use ruin2d_core::qp::{ActiveSet, QpSolution};
use ruin2d_core::verify::VerifyReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub params: Option<ModelParams>,
    pub result: Payload,
    pub tool_version: String,
    pub seed: Option<u64>,
}

impl RunRecord {
    pub fn new(command: &str, params: Option<ModelParams>, result: Payload, seed: Option<u64>) -> Self {
        RunRecord {
            command: command.to_string(),
            params,
            result,
            tool_version: TOOL_VERSION.to_string(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Asymptotics(GammaReport),
    Sweep(Vec<SweepRow>),
    Oracle(OracleReport),
    Qp(QpReport),
    Simulation(SimulationReport),
    Ladder(LadderReport),
    Verify(VerifyReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub asymptotics: AsymptoticsResult,
    pub critical_values: CriticalValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub regime: String,
    pub gamma: f64,
    pub g_min: f64,
    pub t0_t: f64,
    pub t0_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub oracle: OracleResult,
    pub closed_form_g_min: f64,
    pub rel_gap: f64,
    pub arg_min_distance: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpReport {
    pub solution: QpSolution,
    pub validating_sets: Vec<ActiveSet>,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimConfig,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub config: SimConfig,
    pub common_seed: bool,
    pub rungs: Vec<LadderRung>,
    /// Least-squares slope of `-ln p_hat` against `u`; `NaN` with fewer than
    /// two rungs that have hits.
    #[serde(with = "extended")]
    pub fitted_slope: f64,
    #[serde(with = "extended")]
    pub fitted_slope_conditional: f64,
}

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}
