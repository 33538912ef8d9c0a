use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use powerlaw_fem::io::{run, Command, RunConfig};
use powerlaw_fem::FemError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Solve once on the finest level, write solution.vtk and iterations.csv.
    Solve,
    /// Refinement study, written to convergence.csv.
    Convergence,
    /// Invariant checks on every level, written to checks.csv.
    Verify,
}

/// Stabilised P1/P0 solver for stationary power-law flow.
///
/// Defaults: r = 2, d = 2, n = 2 macro cells per side, levels = 3, case M1,
/// tolerance 1e-10, max_iterations 200, damping 1 (0.7 for r < 2), out = out.
/// Config files hold `key = value` lines; flags override file keys.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Cmd,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Power-law exponent.
    #[arg(long)]
    r: Option<f64>,
    /// Number of refinement levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage_error(e: FemError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::read_file(path) {
            Ok(cfg) => cfg,
            Err(e) => return usage_error(e),
        },
        None => RunConfig::default(),
    };
    cfg.command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Convergence => Command::Convergence,
        Cmd::Verify => Command::Verify,
    };
    if let Some(r) = cli.r {
        cfg.r = r;
    }
    if let Some(levels) = cli.levels {
        cfg.levels = levels;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Err(e) = cfg.validate() {
        return usage_error(e);
    }
    match run(&cfg, &mut std::io::stdout()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
