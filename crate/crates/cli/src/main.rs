//! `nurs` command-line driver.

mod commands;
mod config;
mod error;
mod output;
mod targets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Opts;
use error::{config as config_error, Result};

/// Worker threads for parallel chains and sweeps. Defaults to all cores.
const WORKERS_ENV: &str = "NURS_WORKERS";

#[derive(Parser)]
#[command(name = "nurs", version, about = "No-Underrun Sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run chains and write states, transitions and per-coordinate summaries
    Sample(Opts),
    /// Long NURS run on Neal's funnel with jump and acceptance diagnostics by omega
    Funnel(Opts),
    /// Coupled infinite-orbit transitions on a Gaussian and their contraction
    Coupling(Opts),
    /// TV distance between the shift kernel and the target over a spacing sweep
    Tv(Opts),
    /// Shift and random-walk acceptance estimates against their lower bounds
    Acceptance(Opts),
    /// Exact orbit-distribution symmetry under lattice translation
    OrbitSymmetry(Opts),
}

fn defaults(command: &Command) -> Opts {
    let base = Opts {
        kernel: Some("nurs".into()),
        h: Some(0.5),
        eps: Some(0.05),
        max_doublings: Some(10),
        steps: Some(1000),
        burn_in: Some(0),
        seed: Some(0),
        chains: Some(1),
        out: Some(PathBuf::from("out")),
        thin: Some(1),
        ..Opts::default()
    };
    match command {
        Command::Sample(_) => Opts {
            target: Some("gaussian:dim=2".into()),
            ..base
        },
        Command::Funnel(_) => Opts {
            target: Some("funnel:d=10".into()),
            h: Some(0.01),
            eps: Some(0.0),
            steps: Some(200_000),
            seed: Some(7),
            thin: Some(10),
            out: Some(PathBuf::from("out/funnel")),
            ..base
        },
        Command::Coupling(_) => Opts {
            target: Some("gaussian:dim=10".into()),
            h: Some(0.3),
            draws: Some(200_000),
            seed: Some(4),
            out: Some(PathBuf::from("out/coupling")),
            ..base
        },
        Command::Tv(_) => Opts {
            target: Some("gaussian:dim=1".into()),
            h_values: Some("0.4,0.2,0.1".into()),
            out: Some(PathBuf::from("out/tv")),
            ..base
        },
        Command::Acceptance(_) => Opts {
            target: Some("gaussian:dim=1".into()),
            h_values: Some("0.25,0.5,1,2".into()),
            states: Some(10),
            draws: Some(200_000),
            seed: Some(6),
            out: Some(PathBuf::from("out/acceptance")),
            ..base
        },
        Command::OrbitSymmetry(_) => Opts {
            target: Some("gaussian:dim=1".into()),
            h: Some(0.7),
            max_doublings: Some(5),
            out: Some(PathBuf::from("out/orbit-symmetry")),
            ..base
        },
    }
}

fn init_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_error(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(format!("{WORKERS_ENV}: {e}")))
}

fn dispatch(cli: Cli) -> Result<bool> {
    init_workers()?;
    let defaults = defaults(&cli.command);
    match cli.command {
        Command::Sample(o) => commands::sample(&o.resolve(&defaults)?),
        Command::Funnel(o) => commands::funnel(&o.resolve(&defaults)?),
        Command::Coupling(o) => commands::coupling(&o.resolve(&defaults)?),
        Command::Tv(o) => commands::tv(&o.resolve(&defaults)?),
        Command::Acceptance(o) => commands::acceptance(&o.resolve(&defaults)?),
        Command::OrbitSymmetry(o) => commands::orbit_symmetry(&o.resolve(&defaults)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        // a failed verdict is a finding, not a usage error
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
