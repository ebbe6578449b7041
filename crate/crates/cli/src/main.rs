//! `chemotaxis`: run scenarios, print constants, sweep parameters and
//! estimate functional-inequality constants.
//!
//! Exit codes: 0 success, 1 usage, configuration or I/O error, 2 blow-up.

mod commands;
mod config;
mod snapshot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{Scale, Which};
use crate::config::ScenarioConfig;

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Chemotaxis with density-suppressed motility and logistic damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write diagnostics/snapshots.
    Run { config: PathBuf },
    /// Print the explicit constants and the regime classification.
    Constants { config: PathBuf },
    /// Run the scenario over a range of one parameter.
    Sweep {
        config: PathBuf,
        /// a, b, sigma, or a motility parameter such as chi or k.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long)]
        count: usize,
        /// Space the values geometrically.
        #[arg(long)]
        log: bool,
        /// Summary CSV path.
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Numerically estimate xi, G or R and save the extremal field.
    EstimateConstant {
        config: PathBuf,
        #[arg(long, value_enum)]
        which: WhichArg,
        /// Snapshot path for the extremal field (default: <which>_extremal.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Xi,
    #[value(name = "G", alias = "g")]
    G,
    #[value(name = "R", alias = "r")]
    R,
}

fn load(path: &Path) -> chemotaxis_core::Result<ScenarioConfig> {
    ScenarioConfig::load(path)
}

fn dispatch(cli: Cli) -> chemotaxis_core::Result<()> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Run { config } => commands::run(&load(&config)?, &mut out),
        Command::Constants { config } => commands::constants(&load(&config)?, &mut out),
        Command::Sweep {
            config,
            param,
            lo,
            hi,
            count,
            log,
            out: path,
        } => {
            let scale = if log { Scale::Log } else { Scale::Linear };
            let values = commands::sweep_values(lo, hi, count, scale)?;
            commands::sweep(&load(&config)?, &param, &values, &path, &mut out)
        }
        Command::EstimateConstant { config, which, out: path } => {
            let (which, name) = match which {
                WhichArg::Xi => (Which::Xi, "xi"),
                WhichArg::G => (Which::G, "G"),
                WhichArg::R => (Which::R, "R"),
            };
            let path = path.unwrap_or_else(|| PathBuf::from(format!("{name}_extremal.csv")));
            commands::estimate_constant(&load(&config)?, which, &path, &mut out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_blow_up() { 2 } else { 1 })
        }
    }
}
