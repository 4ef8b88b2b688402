//! Library side of the `ruin2d` binary: argument grammar, the JSON run
//! record and output handling.

pub mod commands;
pub mod config;
pub mod record;

use std::ffi::OsString;
use std::io::Write;

use clap::{CommandFactory, FromArgMatches};
use thiserror::Error;

use ruin2d_core::{McError, ModelError, OracleError, QpError};

pub use commands::{Cli, Command, Outcome};
pub use record::{Payload, RunRecord, TOOL_VERSION};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const GAP: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Simulation(#[from] McError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            // The oracle ran but could not certify a minimum.
            CliError::Oracle(OracleError::BoundaryHit { .. } | OracleError::BoxDegenerate) => exit::GAP,
            _ => exit::USAGE,
        }
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<(), CliError> {
    let stdout_err = |source| CliError::Io { context: "writing to stdout".into(), source };
    let mut csv_bytes = Vec::new();
    if let Some(table) = &outcome.csv {
        table
            .write(&mut csv_bytes)
            .map_err(|e| CliError::Io { context: "formatting CSV".into(), source: e.into() })?;
    }
    if let Some(path) = &outcome.csv_file {
        commands::write_atomically(path, &csv_bytes)?;
    }
    let mut out = std::io::stdout().lock();
    if cli.json {
        let text = serde_json::to_string_pretty(&outcome.record)
            .map_err(|e| CliError::Io { context: "serialising JSON".into(), source: e.into() })?;
        writeln!(out, "{text}").map_err(stdout_err)?;
    } else if cli.csv && outcome.csv_file.is_none() {
        out.write_all(&csv_bytes).map_err(stdout_err)?;
    } else {
        out.write_all(outcome.table.as_bytes()).map_err(stdout_err)?;
        if let Some(path) = &outcome.csv_file {
            writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
        }
    }
    out.flush().map_err(stdout_err)
}

fn run_parsed(cli: &Cli) -> Result<i32, CliError> {
    let work = || -> Result<i32, CliError> {
        let outcome = commands::execute(&cli.command)?;
        emit(cli, &outcome)?;
        Ok(outcome.exit_code)
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    // Later occurrences of a flag replace earlier ones; config entries come first.
    let parsed = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|sub| sub.args_override_self(true))
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run_parsed(&cli) {
        Ok(code) => code,
        // The reader went away (`| head`); nothing left to report to.
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
