mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use thiserror::Error;

use commands::Stage;
use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        source: heatcurve_core::Error,
    },
    #[error(transparent)]
    Core(#[from] heatcurve_core::Error),
    #[error("writing {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError::Config(message)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Input { source, .. } | CliError::Core(source) => source.kind().exit_code() as u8,
            CliError::Output { .. } => 2,
        }
    }
}

/// Derive per-cluster heating curves from measured demand, weather and a
/// room-level building description.
#[derive(Debug, Parser)]
#[command(name = "heatcurve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and align demand and weather onto the 10-minute grid.
    Ingest(Common),
    /// Cluster the intervals of the day.
    Cluster(Common),
    /// Fit the per-cluster demand model.
    Demand(Common),
    /// Allocate demand to rooms and heaters.
    Loads(Common),
    /// Derive the heatcurve of every cluster.
    Heatcurve(Common),
    /// Match the experiment period to a reference period and compare valve openings.
    Evaluate(Common),
    /// Heatcurves, evaluation when valve data is configured, and a summary.
    Report(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, stage) = match &cli.command {
        Command::Ingest(c) => (c, Some(Stage::Ingest)),
        Command::Cluster(c) => (c, Some(Stage::Cluster)),
        Command::Demand(c) => (c, Some(Stage::Demand)),
        Command::Loads(c) => (c, Some(Stage::Loads)),
        Command::Heatcurve(c) => (c, Some(Stage::Heatcurve)),
        Command::Evaluate(c) | Command::Report(c) => (c, None),
    };
    let cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    let artifacts = match (&cli.command, stage) {
        (_, Some(stage)) => {
            let r = commands::execute(&cfg, stage)?;
            commands::artifacts(&cfg, &r, stage)
        }
        (Command::Evaluate(_), None) => commands::evaluate(&cfg)?.1,
        _ => commands::report(&cfg)?,
    };
    let written = output::write_all(&cfg.output_dir, &artifacts)?;
    info!("wrote {} files to {}", written.len(), cfg.output_dir.display());
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
