//! `hetnet`: experiment driver for delay-aware spectrum allocation.
//!
//! Subcommands generate scenarios, solve the partition problem, sweep loads
//! against baseline schemes with queue-simulation validation, render
//! partitions, and run the power/spectrum alternation. One JSON config (all
//! fields optional) plus flag overrides drives everything; outputs are CSV.
//!
//! Exit codes: 0 success, 1 config error, 2 infeasible demand,
//! 3 internal numeric failure.

mod config;
mod output;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, Scheme};

#[derive(Debug)]
pub enum CliError {
    /// Unusable configuration or environment; exit code 1.
    Config(String),
    /// The demand cannot be stabilized; exit code 2.
    Infeasible(String),
    /// The solver or simulator failed internally; exit code 3.
    Numeric(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Numeric(m) => write!(f, "numeric: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hetnet",
    version,
    about = "Delay-aware spectrum allocation experiments on hexagonal cellular scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario (grid, stations, efficiency table) and save it as JSON.
    Gen {
        #[command(flatten)]
        overrides: Overrides,
        /// Scenario destination.
        #[arg(long, default_value = "scenario.json")]
        out: PathBuf,
    },
    /// Find the delay-optimal spectrum partition at one load.
    Solve {
        #[command(flatten)]
        overrides: Overrides,
        /// Average packet arrival rate.
        #[arg(long)]
        load: f64,
        /// Also write the full solve report as JSON.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Evaluate every (load, scheme) pair and emit one CSV row each.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve one point and validate it by simulation (one CSV row).
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        /// Average packet arrival rate.
        #[arg(long)]
        load: f64,
        /// Allocation scheme to evaluate.
        #[arg(long, value_enum, default_value_t = Scheme::Optimal)]
        scheme: Scheme,
    },
    /// Render the optimal partition as a station-by-segment table.
    Partition {
        #[command(flatten)]
        overrides: Overrides,
        /// Average packet arrival rate.
        #[arg(long)]
        load: f64,
    },
    /// Alternate per-station power rebalancing with spectrum re-optimization.
    Power {
        #[command(flatten)]
        overrides: Overrides,
        /// Average packet arrival rate.
        #[arg(long)]
        load: f64,
        /// Per-station power budget in watts.
        #[arg(long, default_value_t = 1.0)]
        pmax: f64,
        /// Alternation rounds before giving up.
        #[arg(long, default_value_t = 20)]
        max_rounds: usize,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { overrides, out } => {
            let cfg = overrides.build()?;
            run::cmd_gen(&cfg, &out)
        }
        Command::Solve {
            overrides,
            load,
            report,
        } => {
            let cfg = overrides.build()?;
            run::cmd_solve(&cfg, load, report.as_deref())
        }
        Command::Sweep { overrides } => {
            let cfg = overrides.build()?;
            run::cmd_sweep(&cfg)
        }
        Command::Simulate {
            overrides,
            load,
            scheme,
        } => {
            let cfg = overrides.build()?;
            run::cmd_simulate(&cfg, load, scheme)
        }
        Command::Partition { overrides, load } => {
            let cfg = overrides.build()?;
            run::cmd_partition(&cfg, load)
        }
        Command::Power {
            overrides,
            load,
            pmax,
            max_rounds,
        } => {
            let cfg = overrides.build()?;
            run::cmd_power(&cfg, load, pmax, max_rounds)
        }
    }
}

fn main() -> ExitCode {
    // Map usage errors to exit code 1 so 2 stays reserved for infeasibility.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(help_or_version) => {
            let _ = help_or_version.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
