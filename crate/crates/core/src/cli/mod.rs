//! Experiment orchestration behind the `twistlab` binary.
//!
//! A subcommand selects a list of checks; they fan out over a rayon pool and
//! each writes its CSV atomically as soon as it finishes. A JSON manifest with
//! the config hash closes the run.

pub mod checks;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

pub use checks::{lookup, CheckSpec, Report, Table, CHECKS};
pub use config::ExperimentConfig;

use crate::error::{Error, Result};

/// Environment variable overriding `--out`.
pub const OUT_ENV: &str = "TWISTLAB_OUT";
const DEFAULT_OUT: &str = "twistlab-out";

#[derive(Debug, Parser)]
#[command(name = "twistlab", version, about = "Twist-map experiments on (degenerate) Liouville domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config; defaults are used for missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overridden by TWISTLAB_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Integration tolerance, overriding the config.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads; 0 or absent uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Square-root/squaring roundtrips on collar grids.
    Degenerate,
    /// Build and tabulate the linear-at-infinity extension.
    Extend,
    /// Verify the action-growth bound on collar trajectories.
    ActionGrowth,
    /// Smoothing family table: sup-difference, boundary slope, twist margin.
    Smooth,
    /// Symplectic blocks, rotation indices and Reeb-arc index growth.
    Index,
    /// Twist values and fixed points of the Katok example.
    Katok,
    /// Billiard map checks on the configured tables.
    Billiard,
    /// Prime-iterate periodic orbit survey.
    Orbits,
    /// Lagrangian chords of the annulus map.
    Chords,
    /// Every check, including flow conservation.
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Degenerate => "degenerate",
            Command::Extend => "extend",
            Command::ActionGrowth => "action-growth",
            Command::Smooth => "smooth",
            Command::Index => "index",
            Command::Katok => "katok",
            Command::Billiard => "billiard",
            Command::Orbits => "orbits",
            Command::Chords => "chords",
            Command::All => "all",
        }
    }

    /// Ids of the checks this command runs.
    pub fn checks(&self) -> Vec<&'static str> {
        match self {
            Command::Katok => vec!["katok-twist", "katok-scan"],
            Command::Index => vec!["index", "conservation"],
            Command::All => CHECKS.iter().map(|c| c.id).collect(),
            other => vec![other.name()],
        }
    }
}

/// Result of one check as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub criterion: Option<u8>,
    pub passed: bool,
    pub summary: String,
    pub metrics: Vec<(String, f64)>,
    pub elapsed_secs: f64,
    pub limit_secs: f64,
    pub within_limit: bool,
    pub error: Option<String>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<(String, Table)>,
}

/// Runs one check, converting errors into a failed outcome.
pub fn run_check(spec: &CheckSpec, cfg: &ExperimentConfig) -> CheckOutcome {
    let start = Instant::now();
    let result = (spec.run)(cfg);
    let elapsed = start.elapsed().as_secs_f64();
    let (report, error) = match result {
        Ok(r) => (r, None),
        Err(e) => (Report { summary: format!("error: {e}"), ..Report::default() }, Some(e.to_string())),
    };
    CheckOutcome {
        id: spec.id,
        criterion: spec.criterion,
        passed: report.passed && error.is_none(),
        summary: report.summary,
        metrics: report.metrics,
        elapsed_secs: elapsed,
        limit_secs: spec.limit_secs,
        within_limit: elapsed <= spec.limit_secs,
        error,
        files: Vec::new(),
        tables: report.tables,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes the tables of `outcome` into `dir` and records the file names.
pub fn write_tables(dir: &Path, outcome: &mut CheckOutcome) -> Result<()> {
    for (suffix, table) in &outcome.tables {
        let name = if suffix.is_empty() { format!("{}.csv", outcome.id) } else { format!("{}-{suffix}.csv", outcome.id) };
        write_atomic(&dir.join(&name), &csv_bytes(table)?)?;
        outcome.files.push(name);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub twistlab_version: &'static str,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

/// Output directory: `TWISTLAB_OUT`, then `--out`, then the config, then a default.
pub fn resolve_out(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(v) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(v);
    }
    flag.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Loads the config named on the command line and applies `--tol`.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = cli.tol {
        cfg.tol = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Runs `command` and writes its artifacts into `out`.
pub fn execute(command: Command, cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Manifest> {
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Config(e.to_string()))?;
    let specs: Vec<&CheckSpec> = command.checks().into_iter().filter_map(lookup).collect();
    let outcomes = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let mut o = run_check(spec, cfg);
                if let Err(e) = write_tables(out, &mut o) {
                    o.passed = false;
                    o.error = Some(format!("writing results: {e}"));
                }
                log::info!("{} {} in {:.2} s", o.id, if o.passed { "passed" } else { "failed" }, o.elapsed_secs);
                o
            })
            .collect::<Vec<_>>()
    });
    let manifest = Manifest {
        command: command.name(),
        twistlab_version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.hash(),
        config: cfg.clone(),
        threads: pool.current_num_threads(),
        passed: outcomes.iter().all(|o| o.passed),
        checks: outcomes,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out.join(format!("manifest-{}.json", command.name())), text.as_bytes())?;
    Ok(manifest)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("twistlab: {e}");
            return 2;
        }
    };
    let out = resolve_out(cli.out.as_deref(), &cfg);
    match execute(cli.command, &cfg, &out, cli.jobs.unwrap_or(0)) {
        Ok(m) => {
            for o in &m.checks {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<14} {:>8.2} s  {}", o.id, o.elapsed_secs, o.summary);
            }
            println!("results in {}", out.display());
            i32::from(!m.passed)
        }
        Err(e) => {
            eprintln!("twistlab: {e}");
            2
        }
    }
}
