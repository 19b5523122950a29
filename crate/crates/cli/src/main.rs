mod config;
mod error;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Overrides, RunConfig};
use error::CliError;
use scenario::{Output, Scenario};

/// Displaced-frame simulation of strongly driven cavity QED and optomechanics.
#[derive(Debug, Parser)]
#[command(name = "framesim", version)]
struct Args {
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// TOML or JSON run configuration (JSON by `.json` extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Frame interval in ns.
    #[arg(long)]
    tau_ns: Option<f64>,
    #[arg(long)]
    ncav_dim: Option<usize>,
    #[arg(long)]
    nmech_dim: Option<usize>,
}

fn run(args: &Args) -> Result<String, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply(&Overrides { tau_ns: args.tau_ns, ncav_dim: args.ncav_dim, nmech_dim: args.nmech_dim });
    cfg.validate()?;
    let out = Output::new(&args.out, &cfg)?;
    scenario::run(args.scenario, &cfg, &out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("framesim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
