mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Settings;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Parser)]
#[command(name = "polygrpd", version, about = "Checks and simulations for poly-Poisson structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Axioms (i)-(iii) of a structure at random points.
    CheckStructure(Common),
    /// Isotropic / coisotropic / Lagrangian / poly-Lagrangian classification.
    Classify(Common),
    /// Characteristic distribution and leaf forms.
    Foliation(Common),
    /// Reducibility, the reduction condition and the reduced form.
    Reduce(Common),
    /// Morita double-fibration conditions for a matrix group.
    Morita(Common),
    /// Solve a cotangent path and write it out.
    IntegratePath(Common),
    /// Gauge flows of a solved path and their invariants.
    GaugeDemo(Common),
    /// Axioms A.1-A.6 on a linear relational model.
    Relational(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (same as --config).
    path: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "tolerance-scale")]
    tolerance_scale: Option<f64>,
}

fn settings(c: &Common) -> Result<Settings, CliError> {
    let path = match (&c.path, &c.config) {
        (Some(_), Some(_)) => return Err(CliError::Config("give the config either positionally or with --config".into())),
        (Some(p), None) | (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    let config = match path {
        Some(p) => config::load(p)?,
        None => config::Config::default(),
    };
    let tolerance_scale = c.tolerance_scale.or(config.tolerance_scale).unwrap_or(1.0);
    if !(tolerance_scale.is_finite() && tolerance_scale > 0.0) {
        return Err(CliError::Config("tolerance scale must be positive".into()));
    }
    if c.grid.or(config.grid).is_some_and(|g| g < 4) {
        return Err(CliError::Config("grid must have at least 4 intervals".into()));
    }
    let out = c
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Settings {
        seed: c.seed.or(config.seed),
        samples: c.samples.or(config.samples),
        grid: c.grid.or(config.grid),
        tolerance_scale,
        out,
        config,
    })
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("POLYGRPD_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("POLYGRPD_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<report::Report, CliError> {
    init_threads()?;
    let (f, common): (fn(&Settings) -> Result<report::Report, CliError>, &Common) = match &cli.command {
        Command::CheckStructure(c) => (commands::check_structure, c),
        Command::Classify(c) => (commands::classify, c),
        Command::Foliation(c) => (commands::foliation, c),
        Command::Reduce(c) => (commands::reduce, c),
        Command::Morita(c) => (commands::morita, c),
        Command::IntegratePath(c) => (commands::integrate_path, c),
        Command::GaugeDemo(c) => (commands::gauge_demo, c),
        Command::Relational(c) => (commands::relational, c),
    };
    let s = settings(common)?;
    let rep = f(&s)?;
    rep.write(&s.out)?;
    Ok(rep)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(rep) => {
            for c in &rep.checks {
                println!("{:<36} {:<22} {:.3e} (tol {:.1e})", c.name, c.status, c.worst_residual, c.tolerance);
            }
            println!("{}: {}", rep.command, rep.status);
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                for c in rep.checks.iter().filter(|c| c.failed()) {
                    if !c.detail.is_empty() {
                        eprintln!("{} failed: {}", c.name, c.detail);
                    }
                }
                ExitCode::from(1)
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
