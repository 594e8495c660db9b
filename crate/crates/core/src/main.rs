//! Command-line front end: strategy table, survival/ruin curves, figure
//! data, Monte Carlo estimates, and the solver-vs-simulation verification.
//!
//! Flags override the corresponding JSON config fields; everything else
//! comes from the config file or the built-in baseline defaults.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use heunruin::config::{FileConfig, Scale};
use heunruin::report::{
    cmd_derive, cmd_plot_data, cmd_simulate, cmd_solve, cmd_table_gamma, cmd_verify,
};
use heunruin::{Error, Result};

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  invalid parameters or configuration
  3  degenerate model (gamma <= 1: ruin is certain)
  4  solver failure (series seed, ODE integration, quadrature)
  5  tail-fit failure (no plateau, window too narrow, remainder too heavy)
  6  I/O failure
  7  verification criteria failed";

#[derive(Parser)]
#[command(
    name = "heunruin",
    version,
    about = "Exact ruin probabilities under proportional investment, with Monte Carlo cross-checks",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print model, derived, and Heun-coefficient blocks per strategy
    Derive(DeriveArgs),
    /// CSV table of the decay exponent gamma and tail order gamma - 1
    TableGamma(TableGammaArgs),
    /// Solve one strategy; emit a JSON report and optionally a probe CSV
    Solve(SolveArgs),
    /// Figure-ready CSV of psi on a grid, one column per strategy
    PlotData(PlotDataArgs),
    /// Monte Carlo ruin estimates at given initial capitals
    Simulate(SimulateArgs),
    /// Solve, then verify: boundary identity, residual sweep, MC comparison
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// JSON config file (sections model/solver/mc/output); missing fields
    /// take baseline defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<FileConfig> {
        match &self.config {
            Some(path) => FileConfig::load(path),
            None => Ok(FileConfig::default()),
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Smallest probe capital
    #[arg(long)]
    u_min: Option<f64>,
    /// Largest probe capital
    #[arg(long)]
    u_max: Option<f64>,
    /// Number of probes
    #[arg(long)]
    u_points: Option<usize>,
    /// Probe spacing: semilog (linear grid) or loglog (log grid)
    #[arg(long, value_parser = Scale::from_str)]
    scale: Option<Scale>,
}

impl GridArgs {
    fn apply(&self, cfg: &mut FileConfig) {
        if let Some(v) = self.u_min {
            cfg.output.u_min = v;
        }
        if let Some(v) = self.u_max {
            cfg.output.u_max = v;
        }
        if let Some(v) = self.u_points {
            cfg.output.u_points = v;
        }
        if let Some(v) = self.scale {
            cfg.output.scale = v;
        }
    }
}

#[derive(Args)]
struct McArgs {
    /// Monte Carlo path count
    #[arg(long)]
    paths: Option<u64>,
    /// Euler-Maruyama step size
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon T
    #[arg(long)]
    horizon: Option<f64>,
    /// RNG seed (one counter-based stream per path)
    #[arg(long)]
    seed: Option<u64>,
}

impl McArgs {
    fn apply(&self, cfg: &mut FileConfig) {
        if let Some(v) = self.paths {
            cfg.mc.n_paths = v;
        }
        if let Some(v) = self.dt {
            cfg.mc.dt = v;
        }
        if let Some(v) = self.horizon {
            cfg.mc.horizon = v;
        }
        if let Some(v) = self.seed {
            cfg.mc.seed = v;
        }
    }
}

#[derive(Args)]
struct DeriveArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction; repeatable (defaults to the config model's kappa)
    #[arg(long)]
    kappa: Vec<f64>,
}

#[derive(Args)]
struct TableGammaArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction; repeatable (defaults to the config sweep list)
    #[arg(long)]
    kappa: Vec<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction (single value)
    #[arg(long)]
    kappa: Vec<f64>,
    /// Solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the (u, phi, psi) probe CSV here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Include wall-clock timings in the report (nondeterministic)
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct PlotDataArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction; repeatable (defaults to the config sweep list)
    #[arg(long)]
    kappa: Vec<f64>,
    /// Solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction (single value)
    #[arg(long)]
    kappa: Vec<f64>,
    /// Initial capital; repeatable
    #[arg(long)]
    u: Vec<f64>,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Strategy fraction (single value)
    #[arg(long)]
    kappa: Vec<f64>,
    /// Solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Comparison capital; repeatable (defaults to 0, 1, 2, 5, 10)
    #[arg(long)]
    u: Vec<f64>,
    #[command(flatten)]
    mc: McArgs,
    /// Write the verification report JSON here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Include wall-clock timings in the report (nondeterministic)
    #[arg(long)]
    timings: bool,
}

/// At most one --kappa for single-strategy commands; applies it to the model.
fn apply_single_kappa(cfg: &mut FileConfig, kappas: &[f64]) -> Result<()> {
    match kappas {
        [] => Ok(()),
        [k] => {
            cfg.model.kappa = *k;
            Ok(())
        }
        more => Err(Error::Config(format!(
            "this command takes a single --kappa, got {}",
            more.len()
        ))),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Derive(args) => {
            let cfg = args.config.load()?;
            cmd_derive(&cfg, &args.kappa, &mut stdout.lock())?;
        }
        Command::TableGamma(args) => {
            let cfg = args.config.load()?;
            let kappas = if args.kappa.is_empty() {
                cfg.kappas.clone()
            } else {
                args.kappa.clone()
            };
            cmd_table_gamma(&cfg, &kappas, &mut stdout.lock())?;
        }
        Command::Solve(args) => {
            let mut cfg = args.config.load()?;
            apply_single_kappa(&mut cfg, &args.kappa)?;
            if let Some(tol) = args.tol {
                cfg.solver.tol = tol;
            }
            args.grid.apply(&mut cfg);
            let report = cmd_solve(&cfg, args.out.as_deref(), args.timings)?;
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
            writeln!(w)?;
        }
        Command::PlotData(args) => {
            let mut cfg = args.config.load()?;
            if let Some(tol) = args.tol {
                cfg.solver.tol = tol;
            }
            args.grid.apply(&mut cfg);
            let kappas = if args.kappa.is_empty() {
                cfg.kappas.clone()
            } else {
                args.kappa.clone()
            };
            match &args.out {
                Some(path) => {
                    let mut file = std::fs::File::create(path)?;
                    cmd_plot_data(&cfg, &kappas, &mut file)?;
                }
                None => cmd_plot_data(&cfg, &kappas, &mut stdout.lock())?,
            }
        }
        Command::Simulate(args) => {
            let mut cfg = args.config.load()?;
            apply_single_kappa(&mut cfg, &args.kappa)?;
            args.mc.apply(&mut cfg);
            let us = if args.u.is_empty() {
                heunruin::report::VERIFY_PROBES.to_vec()
            } else {
                args.u.clone()
            };
            let results = cmd_simulate(&cfg, &us)?;
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &results).map_err(Error::from)?;
            writeln!(w)?;
        }
        Command::Verify(args) => {
            let mut cfg = args.config.load()?;
            apply_single_kappa(&mut cfg, &args.kappa)?;
            if let Some(tol) = args.tol {
                cfg.solver.tol = tol;
            }
            args.mc.apply(&mut cfg);
            let outcome = cmd_verify(&cfg, &args.u, args.timings)?;
            let mut w = stdout.lock();
            for line in &outcome.lines {
                writeln!(w, "{line}")?;
            }
            let passed = outcome.lines.iter().filter(|l| l.pass).count();
            writeln!(
                w,
                "verification: {passed}/{} criteria passed",
                outcome.lines.len()
            )?;
            if let Some(path) = &args.out {
                let file = std::fs::File::create(path)?;
                serde_json::to_writer_pretty(file, &outcome).map_err(Error::from)?;
            }
            if !outcome.all_pass {
                return Ok(ExitCode::from(7));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// stdout closed mid-write (e.g. piped into `head`): conventional silent exit.
fn is_broken_pipe(e: &Error) -> bool {
    match e {
        Error::Io(io) => io.kind() == std::io::ErrorKind::BrokenPipe,
        Error::Json(j) => j.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe),
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
