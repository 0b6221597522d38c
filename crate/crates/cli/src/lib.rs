//! Command-line front end: configuration, experiment orchestration and
//! CSV/JSON reports.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod verify;

pub use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] abrikosov_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        use abrikosov_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(e) => match e {
                E::InvalidShape(_)
                | E::ShapeOutOfRange { .. }
                | E::InvalidParameter(_)
                | E::GridMismatch(_)
                | E::WrongSide { .. }
                | E::DegenerateDenominator(_)
                | E::Unsupported(_)
                | E::Snapshot(_)
                | E::Csv(_)
                | E::Json(_) => 2,
                _ => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "abrikosov", version, about = "Abrikosov vortex lattices of the Ginzburg-Landau equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Scan of beta(tau) and kappa_c over a shape grid.
    Beta,
    /// Critical points of beta and random multistart descents.
    CriticalPoints,
    /// Bifurcating branch over an amplitude grid, with the expansion fit.
    Branch,
    /// Numeric and asymptotic E_b(tau) over a shape grid.
    FieldLandscape,
    /// Canonical gauge of a lattice state (from --input or a scrambled branch state).
    GaugeFix,
    /// Invariant suites with machine-readable verdicts.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Asymptotics,
    Gauge,
    Spectrum,
    Symmetry,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Beta => "beta".into(),
            Command::CriticalPoints => "critical-points".into(),
            Command::Branch => "branch".into(),
            Command::FieldLandscape => "field-landscape".into(),
            Command::GaugeFix => "gauge-fix".into(),
            Command::Verify { suite } => format!("verify-{}", suite.to_possible_value().expect("named").get_name()),
        }
    }
}

/// Where a command writes, and the provenance record stamped on each file.
pub struct Output {
    pub dir: PathBuf,
    pub provenance: Value,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(command: &Command, config: &RunConfig) -> Result<Self, CliError> {
        let dir = config.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        // a marker from an earlier failed run would be misleading
        let _ = std::fs::remove_file(dir.join("FAILED.json"));
        let mut recorded = config.clone();
        recorded.out_dir = None;
        let provenance = json!({
            "program": "abrikosov",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command.name(),
            "config_hash": config.hash(),
            "config": recorded,
            "truncations": { "grid": config.grid, "levels": config.levels },
            "status": "ok",
        });
        Ok(Self { dir, provenance, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Provenance with extra fields merged in.
    pub fn stamp(&self, extra: Value) -> Value {
        let mut p = self.provenance.clone();
        if let (Some(obj), Value::Object(add)) = (p.as_object_mut(), extra) {
            obj.extend(add);
        }
        p
    }

    pub fn table(&mut self, name: &str, extra: Value, columns: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let path = self.path(name);
        abrikosov_core::io::write_table(&path, &self.stamp(extra), columns, rows)?;
        self.written.push(path);
        Ok(())
    }

    /// JSON report `{provenance, result}`.
    pub fn report<T: Serialize>(&mut self, name: &str, extra: Value, result: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let doc = json!({ "provenance": self.stamp(extra), "result": result });
        abrikosov_core::io::write_json(&path, &doc)?;
        self.written.push(path);
        Ok(())
    }

    /// Failure marker next to partial results.
    pub fn fail(&mut self, err: &CliError) -> Result<(), CliError> {
        let path = self.path("FAILED.json");
        let doc = json!({ "provenance": self.stamp(json!({ "status": "failed" })), "error": err.to_string(), "exit_code": err.exit_code() });
        abrikosov_core::io::write_json(&path, &doc)?;
        self.written.push(path);
        Ok(())
    }
}

pub fn failed() -> Value {
    json!({ "status": "failed" })
}

/// Runs a parsed command line; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let config = RunConfig::resolve(&cli.overrides)?;
    let mut out = Output::new(&cli.command, &config)?;
    let res = match &cli.command {
        Command::Beta => commands::beta(&config, &mut out),
        Command::CriticalPoints => commands::critical_points(&config, &mut out),
        Command::Branch => commands::branch(&config, &mut out),
        Command::FieldLandscape => commands::field_landscape(&config, &mut out),
        Command::GaugeFix => commands::gauge_fix(&config, &mut out),
        Command::Verify { suite } => verify::run(*suite, &config, &mut out),
    };
    match res {
        Ok(()) => Ok(out.written),
        Err(e) => {
            if e.exit_code() == 3 {
                let _ = out.fail(&e);
            }
            Err(e)
        }
    }
}

pub fn display(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n")
}
