use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twofluid_cli::{parse_config, run_campaign, CliError, ConfigError, RunConfig, Task};

/// Numerical laboratory for a compressible two-fluid model with capillarity.
#[derive(Parser)]
#[command(name = "twofluid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, branches and projector residuals over a frequency grid.
    AnalyzeModes(Common),
    /// Linear decay campaign with generic data and exponent fits.
    LinearDecay(Common),
    /// Lower-bound campaign with slowly vanishing low-frequency data.
    LowerBound(Common),
    /// Nonlinear pseudo-spectral run on a periodic box.
    Simulate(Common),
    /// Fit decay exponents to an existing norm CSV.
    Fit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

fn load(task: Task, common: &Common) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Message(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg: RunConfig =
        toml::from_str(&text).map_err(|e| ConfigError { errors: vec![e.message().to_string()] })?;
    if let Some(t) = cfg.task {
        if t != task {
            return Err(CliError::Message(format!("configuration is for task '{t}', not '{task}'")));
        }
    }
    cfg.task = Some(task);
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    // Re-parse the effective configuration so every check runs on it.
    Ok(parse_config(&cfg.to_toml())?)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TWOFLUID_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Message(format!("TWOFLUID_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Message(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match &cli.command {
        Command::AnalyzeModes(c) => (Task::AnalyzeModes, c),
        Command::LinearDecay(c) => (Task::LinearDecay, c),
        Command::LowerBound(c) => (Task::LowerBound, c),
        Command::Simulate(c) => (Task::Simulate, c),
        Command::Fit(c) => (Task::Fit, c),
    };
    let quiet = common.quiet;
    let log = |m: &str| {
        if !quiet {
            eprintln!("{m}");
        }
    };
    let result = configure_threads().and_then(|_| load(task, common)).and_then(|cfg| {
        let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("twofluid-out"));
        run_campaign(&cfg, &out, &log)
    });
    match result {
        Ok(o) => {
            if !quiet {
                println!("{task}: {} - {}", if o.passed { "PASS" } else { "FAIL" }, o.summary);
                for f in &o.files {
                    println!("  {}", f.display());
                }
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
