use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
mod output;

use output::{emit, Format};

#[derive(Parser)]
#[command(name = "bridge-exit", version, about = "Exit-time statistics of Brownian and Bessel(3) bridges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Special functions: Kolmogorov CDF, band kernel, last-passage law.
    #[command(subcommand)]
    Specfun(commands::Specfun),
    /// Mean exit time by both quadrature representations.
    ExitMean(commands::ExitMeanArgs),
    /// mean / h^2 along a decreasing sequence of half-widths.
    LimitScan(commands::LimitScanArgs),
    /// Monte Carlo exit statistics with a quadrature cross-check.
    McExit(commands::McExitArgs),
    /// Parity of the embedded random walk by Monte Carlo.
    McQfun(commands::McQfunArgs),
    /// Last zero before leaving (-h, h), against the exact law.
    McLastPassage(commands::McLastPassageArgs),
    /// q(x) from the exit-position identity, next to the walk estimate.
    Qfun(commands::QfunArgs),
    /// Corollary and q-integral error terms over several h.
    WalshScan(commands::WalshScanArgs),
    /// Binomial tree against the Gaussian expectation.
    TreePrice(commands::TreePriceArgs),
}

#[derive(Args, Clone, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NonConvergence(String),
    Io(std::io::Error),
}

impl From<bridge_exit::Error> for CliError {
    fn from(e: bridge_exit::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BRIDGE_EXIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("BRIDGE_EXIT_THREADS={raw:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let started = Instant::now();
    let (table, out) = match cli.command {
        Command::Specfun(c) => commands::specfun(c)?,
        Command::ExitMean(a) => (commands::exit_mean(&a)?, a.output),
        Command::LimitScan(a) => (commands::limit_scan(&a)?, a.output),
        Command::McExit(a) => (commands::mc_exit(&a)?, a.output),
        Command::McQfun(a) => (commands::mc_qfun(&a)?, a.output),
        Command::McLastPassage(a) => (commands::mc_last_passage(&a)?, a.output),
        Command::Qfun(a) => (commands::qfun(&a)?, a.output),
        Command::WalshScan(a) => (commands::walsh_scan(&a)?, a.output),
        Command::TreePrice(a) => (commands::tree_price(&a)?, a.output),
    };
    emit(&table, out.format, out.out.as_deref())?;
    eprintln!("wall_time={:.3}s", started.elapsed().as_secs_f64());
    if table.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence("a quadrature or series missed its tolerance".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::NonConvergence(msg)) => {
            eprintln!("error: non-convergence: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
