//! The `fsns` command line: `run`, `verify`, `converge` and `info`.
//!
//! Exit codes: 0 on success (including a run stopped by the monitor), 1 on
//! configuration or I/O errors, 2 on numerical overflow, 3 when a
//! verification property fails.

pub mod config;
pub mod verify;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{bkm_exponent, galerkin_convergence, moment_bound_study, serrin_exponent, DiagnosticsRecord};
use crate::solver::{run_observed, SolverError};
use crate::spectral_field::{fft_size, WavenumberLattice};

pub use config::RunConfig;
pub use verify::Suite;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("{0} verification check(s) failed")]
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Overflow(_) => 2,
            CliError::Verify(_) => 3,
        }
    }

    pub(crate) fn from_solver(e: SolverError) -> Self {
        match e {
            SolverError::Overflow { .. } => CliError::Overflow(e.to_string()),
            SolverError::Io { ref path, .. } => CliError::Io {
                path: path.clone(),
                message: e.to_string(),
            },
            other => CliError::Config(other.to_string()),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fsns", version, about = "Fractional stochastic Navier-Stokes on the 2-torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write the trajectory CSV and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the noise seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a field snapshot every this many steps.
        #[arg(long, value_name = "EVERY_K")]
        snapshots: Option<u64>,
    },
    /// Run a property suite: identities, inequalities, coupling or convergence.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dissipation exponent for the inequality catalog.
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
    },
    /// Galerkin and time-step self-convergence, and moment studies.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print derived quantities of a config, or version information.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            snapshots,
        } => cmd_run(&config, seed, out, snapshots).map(|summary| println!("{summary}")),
        Command::Verify { suite, seed, alpha } => cmd_verify(suite, seed, alpha),
        Command::Converge { config, seed, out } => cmd_converge(&config, seed, out),
        Command::Info { config } => cmd_info(config.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = seed {
        cfg.noise.seed = seed;
    }
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct RunSection {
    version: &'static str,
    /// Shape of the retained wavevector set.
    truncation: &'static str,
    seed: u64,
    started_unix_s: f64,
    finished_unix_s: f64,
    outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stopped_at: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    config: &'a RunConfig,
    run: RunSection,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Summary of a completed `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub records: usize,
    pub stopped_at: Option<f64>,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "wrote {} records to {}", self.records, self.csv.display())?;
        if let Some(t) = self.stopped_at {
            write!(f, "; monitor threshold exceeded at t = {t}")?;
        }
        Ok(())
    }
}

pub fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    snapshots: Option<u64>,
) -> Result<RunSummary, CliError> {
    let started = unix_now();
    let mut cfg = load(config_path, seed, out)?;
    if let Some(k) = snapshots {
        cfg.output.snapshots = k;
    }
    let sim = cfg.to_sim()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let every = cfg.output.snapshots;
    let mut outputs = Vec::new();
    let mut snapshot_error = None;
    let result = run_observed(&sim, |state| {
        if every > 0 && state.step % every == 0 {
            let path = dir.join(format!("snapshot_{:08}.fsns", state.step));
            let written = fs::File::create(&path)
                .and_then(|f| state.velocity().write_snapshot(BufWriter::new(f)));
            match written {
                Ok(()) => outputs.push(path),
                Err(e) => {
                    snapshot_error.get_or_insert(CliError::io(&path, e));
                }
            }
        }
        Ok(())
    });
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let output = result.map_err(CliError::from_solver)?;

    let csv = dir.join("trajectory.csv");
    write_csv(&csv, &output.records)?;
    outputs.insert(0, csv.clone());

    let manifest_path = dir.join("manifest.toml");
    let manifest = Manifest {
        config: &cfg,
        run: RunSection {
            version: env!("CARGO_PKG_VERSION"),
            truncation: "square max(|k1|, |k2|) <= n",
            seed: cfg.noise.seed,
            started_unix_s: started,
            finished_unix_s: unix_now(),
            outputs,
            stopped_at: output.stopped_at(),
        },
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(|e| CliError::io(&manifest_path, e))?;
    Ok(RunSummary {
        csv,
        manifest: manifest_path,
        records: output.records.len(),
        stopped_at: output.stopped_at(),
    })
}

fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{}", DiagnosticsRecord::CSV_HEADER)?;
        for r in records {
            writeln!(w, "{}", r.csv_row())?;
        }
        w.flush()
    };
    write().map_err(|e| CliError::io(path, e))
}

pub fn cmd_verify(suite: Suite, seed: u64, alpha: f64) -> Result<(), CliError> {
    let checks = verify::run_suite(suite, seed, alpha)?;
    for c in &checks {
        println!("{c}");
    }
    match checks.iter().filter(|c| c.failed()).count() {
        0 => Ok(()),
        n => Err(CliError::Verify(n)),
    }
}

pub fn cmd_converge(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load(config_path, seed, out)?;
    let sim = cfg.to_sim()?;
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| CliError::Config("study: section is required".into()))?;
    if study.levels.is_empty() {
        return Err(CliError::Config("study.levels: must not be empty".into()));
    }
    let dts = if study.dt.is_empty() {
        vec![sim.dt]
    } else {
        study.dt.clone()
    };
    let mut report = galerkin_convergence(&sim, &study.levels, &dts, study.paths)
        .map_err(CliError::from_solver)?
        .to_string();
    if !study.moment_levels.is_empty() {
        let moments = moment_bound_study(&sim, &study.moment_levels, study.moment_paths, study.p)
            .map_err(CliError::from_solver)?;
        report.push_str(&moments.to_string());
    }
    print!("{report}");
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("convergence.txt");
    fs::write(&path, report).map_err(|e| CliError::io(&path, e))
}

pub fn cmd_info(config_path: Option<&Path>) -> Result<(), CliError> {
    println!("fsns {}", env!("CARGO_PKG_VERSION"));
    let Some(path) = config_path else {
        return Ok(());
    };
    let cfg = load(path, None, None)?;
    let sim = cfg.to_sim()?;
    let alpha = sim.diss.alpha();
    let n = sim.lattice.level();
    println!("regime: {:?}", sim.diss.regime());
    println!("modes: {} (square truncation, max(|k1|, |k2|) <= {n})", sim.lattice.len());
    println!("product grid: {}", fft_size(WavenumberLattice::min_product_grid(n, n, n)));
    println!("steps: {}", sim.steps().map_err(CliError::from_solver)?);
    match bkm_exponent(alpha, 2, sim.grad_q) {
        Ok(p) => println!("bkm exponent (q = {}): {p}", sim.grad_q),
        Err(e) => println!("bkm exponent: undefined ({e})"),
    }
    match serrin_exponent(alpha, 2) {
        Ok((r, s)) => println!("serrin exponents: time {r}, space {s}"),
        Err(e) => println!("serrin exponents: undefined ({e})"),
    }
    if let Some(noise) = &sim.noise {
        println!("noise trace on lattice: {}", noise.spectrum.trace(sim.lattice));
    }
    Ok(())
}
