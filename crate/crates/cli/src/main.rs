//! `rmt-kit`: batch front end for rmt-core.
//!
//! Exit codes: 0 success, 1 config parse, 2 parameter validation,
//! 3 assertion failure, 4 numerical non-convergence.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "rmt-kit", version, about = "Kernels, samples, densities and hard-edge scans for coupled random matrix products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; falls back to RMT_KIT_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with code 3 unless every scan column decreases strictly.
    #[arg(long, global = true)]
    assert_trend: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check ensemble or perturbation parameters.
    Validate,
    /// Kernel values on an x × y grid.
    Kernel,
    /// Squared singular value samples.
    Sample,
    /// One-point density, optionally against a sample file.
    Density,
    /// Hard-edge or interpolation convergence table.
    Scan,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Kernel => "kernel",
            Command::Sample => "sample",
            Command::Density => "density",
            Command::Scan => "scan",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Params(String),
    Assertion(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Params(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn csv(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Params(m) => write!(f, "invalid parameters: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<rmt_core::Error> for CliError {
    fn from(e: rmt_core::Error) -> Self {
        use rmt_core::Error as E;
        match e {
            E::Accuracy { .. } | E::Numeric(_) | E::Conditioning(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Params(e.to_string()),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RMT_KIT_THREADS") {
            Ok(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("RMT_KIT_THREADS = {s:?} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    match n {
        Some(0) => Err(CliError::Config("thread count must be positive".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(n)
        }
        None => Ok(rayon::current_num_threads()),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let ctx = commands::Context {
        command: cli.command.name(),
        config_path: path.clone(),
        config_bytes: text,
        out: cli.out.clone(),
        threads,
        assert_trend: cli.assert_trend,
    };
    match cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Kernel => commands::kernel(&ctx),
        Command::Sample => commands::sample(&ctx),
        Command::Density => commands::density(&ctx),
        Command::Scan => commands::scan(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmt-kit {}: {e}", cli.command.name());
            ExitCode::from(e.code())
        }
    }
}
