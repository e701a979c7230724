//! Command-line entry point orchestrating ingest -> train -> validate ->
//! counterfact -> report over a declarative run configuration.
//!
//! Exit codes are stable API: 0 ok, 2 ingest failure or rejected source
//! files, 3 train failure, 4 validate failure, 5 counterfact failure,
//! 1 anything else (bad arguments, unreadable config).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use carbontwin_core::pipeline::ModelRole;
use carbontwin_core::schema::Domain;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "carbontwin",
    about = "Harmonize EV/ICEV telemetry, train per-domain emission models, and compose \
             counterfactual emission streams",
    version
)]
struct Cli {
    /// Run configuration file (`key = value` lines)
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set factors.phi=40 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw source tables into harmonized trip files plus a filter report
    Ingest {
        /// Single profile to run (i3, blazer, pacifica, qx50, qx50-strict);
        /// default: every profile with a configured data path
        #[arg(long)]
        profile: Option<String>,
    },
    /// Train one sequence model from harmonized data
    Train {
        /// ev or icev
        #[arg(long)]
        domain: String,
        /// emissions or feature
        #[arg(long)]
        role: String,
        /// Vehicle whose harmonized file to use (defaults to ev.vehicle for ev)
        #[arg(long)]
        vehicle: Option<String>,
    },
    /// Proxy-validate the EV feature/emissions pair on held-out trips
    Validate,
    /// Compose the EV-embedded counterfactual for one observed ICEV trip
    Counterfact {
        /// Trip id within the harmonized ICEV file
        #[arg(long)]
        trip: String,
        /// ICEV vehicle whose harmonized file to read (default qx50)
        #[arg(long)]
        vehicle: Option<String>,
    },
    /// Aggregate one numeric column of a stored table
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        /// Write the aggregate table here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_domain(s: &str) -> Result<Domain> {
    Domain::parse(s).ok_or_else(|| anyhow::anyhow!("unknown domain `{s}` (ev or icev)"))
}

fn parse_role(s: &str) -> Result<ModelRole> {
    ModelRole::parse(s).ok_or_else(|| anyhow::anyhow!("unknown role `{s}` (emissions or feature)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.sets) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let (result, failure_code): (Result<()>, u8) = match &cli.command {
        Command::Ingest { profile } => match commands::ingest::run(&cfg, profile.as_deref()) {
            Ok(rejected) if rejected.is_empty() => (Ok(()), 2),
            Ok(rejected) => (
                Err(anyhow::anyhow!(
                    "{} source file(s) rejected: {}",
                    rejected.len(),
                    rejected.join(", ")
                )),
                2,
            ),
            Err(e) => (Err(e), 2),
        },
        Command::Train {
            domain,
            role,
            vehicle,
        } => {
            let run = || -> Result<()> {
                commands::train::run(
                    &cfg,
                    parse_domain(domain)?,
                    parse_role(role)?,
                    vehicle.as_deref(),
                )
            };
            (run(), 3)
        }
        Command::Validate => (commands::validate::run(&cfg), 4),
        Command::Counterfact { trip, vehicle } => (
            commands::counterfact::run(&cfg, trip, vehicle.as_deref()),
            5,
        ),
        Command::Report {
            input,
            column,
            output,
        } => (
            commands::report::run(&cfg, input, column, output.as_deref()),
            1,
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_code)
        }
    }
}
