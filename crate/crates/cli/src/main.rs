//! Command-line front end for the dynamic Solow model toolkit.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynsolow::params::RegimeMode;
use dynsolow::reproduce::SCENARIOS;

#[derive(Parser, Debug)]
#[command(name = "dynsolow", version, about = "Dynamic Solow model: simulation, equilibria, sweeps and reproduction runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Key-value config file; the base case is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config regime mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RegimeMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory and write it as CSV with a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the equilibria of the reduced system.
    Equilibria {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic trajectories from a grid of starting points.
    Portrait {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every point of a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=v1,v2,...`; repeat for a cartesian grid. `seed` is allowed.
        #[arg(long)]
        grid: Vec<String>,
        /// Worker threads (0 uses all cores).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate and report long-run growth rates.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a named reproduction scenario; exits nonzero if any check fails.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SCENARIOS))]
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 uses all cores).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
}

fn parse_mode(s: &str) -> Result<RegimeMode, String> {
    s.parse()
}

/// Exit status for each failure class.
mod exit {
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const IO: u8 = 5;
}

fn classify(err: &anyhow::Error) -> u8 {
    use dynsolow::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonPositiveTimescale { .. }
                | E::ShareOutOfRange { .. }
                | E::NegativeRate { .. }
                | E::InvalidConfig { .. }
                | E::UnknownKey { .. }
                | E::MalformedValue { .. }
                | E::WrongMode { .. } => exit::CONFIG,
                _ => exit::NUMERICAL,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
    }
    exit::IO
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, out } => commands::simulate(&common, &out),
        Command::Equilibria { common } => commands::equilibria(&common),
        Command::Portrait { common, out } => commands::portrait(&common, &out),
        Command::Sweep {
            common,
            grid,
            parallel,
            out,
        } => commands::sweep(&common, &grid, parallel, &out),
        Command::Analyze { common, out } => commands::analyze(&common, &out),
        Command::Reproduce { scenario, out, parallel } => commands::reproduce(&scenario, parallel, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(exit::CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}
