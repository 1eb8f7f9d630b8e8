//! `qflow`: simulate control schedules, sweep synthesis parameters and steer
//! states from a TOML configuration.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 tolerance
//! not met.

mod commands;
mod config;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qflow", version, about = "Control-pulse synthesis for bilinear Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write the final state, norm log and metadata.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the experiment over the cartesian grid in `[experiment.sweep]`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Keep rows already present in the output CSV and run only the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Steer `experiment.state` to `experiment.target`.
    Steer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_TOLERANCE: u8 = 4;

/// Versions recorded in every artifact.
pub fn versions() -> serde_json::Value {
    serde_json::json!({
        "qflow": qflow::VERSION,
        "qflow_cli": env!("CARGO_PKG_VERSION"),
        "schedule_format": qflow::spectral_sim::SCHEDULE_FORMAT_VERSION,
        "config_format": config::CONFIG_VERSION,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Sweep { config, out, threads, resume } => commands::sweep(&config, &out, threads, resume),
        Command::Steer { config, out } => commands::steer(&config, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
