//! `qrt`: threshold, dispersion, time-stepping and verification runs
//! driven by one config file.
//!
//! Exit status: 0 success, 1 domain or check failure, 2 usage or config error.
//! Results go to the output directory and stdout; diagnostics (level from
//! `QRT_LOG`) go to stderr.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "qrt", version, about = "Quantum-stabilized Rayleigh-Taylor slab computations")]
struct Cli {
    /// TOML or JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,
    /// Also write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    gnuplot_script: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check the equilibrium conditions and export the profile table.
    ValidateProfile,
    /// Critical quantum parameter and its extremal function.
    Threshold,
    /// Leading growth rates over a kappa scan.
    Dispersion,
    /// Time-step one horizontal mode and fit its growth or decay.
    Simulate,
    /// Identity, decomposition, witness, scale-invariance and coercivity checks.
    Verify,
    /// Decay-exponent report for a list of theta.
    Exponents,
}

/// A failed run: message for stderr and the exit status.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: String) -> Self {
        Failure { code: 2, message }
    }

    pub fn check(message: String) -> Self {
        Failure { code: 1, message }
    }
}

impl From<qrt_core::Error> for Failure {
    fn from(e: qrt_core::Error) -> Self {
        match e {
            qrt_core::Error::Config(_) => Failure::usage(e.to_string()),
            _ => Failure::check(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if cli.print_defaults {
        print!("{}", config::defaults_toml());
        return Ok(true);
    }
    let Some(command) = cli.command else {
        return Err(Failure::usage("no subcommand given (see --help)".into()));
    };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    }
    let out = OutDir::create(&cfg.output.dir, cli.gnuplot_script)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let outcome = pool.install(|| match command {
        Command::ValidateProfile => commands::validate(&cfg, &out),
        Command::Threshold => commands::threshold(&cfg, &out),
        Command::Dispersion => commands::dispersion(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out),
        Command::Exponents => commands::exponents(&cfg, &out),
    })?;
    print!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .parse_filters(&std::env::var("QRT_LOG").unwrap_or_else(|_| "warn".into()))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let status = match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code)
        }
    };
    let _ = std::io::stdout().flush();
    status
}
