use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use flexregion_cli::{
    cmd_generate_data, cmd_report, cmd_schedule, cmd_train, cmd_validate, NumericalFailure, Run, RunConfig,
};

#[derive(Parser)]
#[command(name = "flexregion", version, about = "Data-driven building flexibility regions")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory relative paths resolve against (default: the config's directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the synthetic plants and write train/cv/test CSVs.
    GenerateData,
    /// Fit a model bundle per building.
    Train,
    /// Test-set statistics and the RC comparison.
    Validate,
    /// Solve the aggregator program over the v and alpha grids.
    Schedule,
    /// Region tables and tree dumps.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let root = match (&cli.out, &cli.config) {
        (Some(o), _) => o.clone(),
        (None, Some(c)) => c.parent().map(PathBuf::from).unwrap_or_default(),
        (None, None) => PathBuf::from("."),
    };
    let run = Run::new(config, root)?;
    let written = match cli.command {
        Command::GenerateData => cmd_generate_data(&run)?,
        Command::Train => cmd_train(&run)?,
        Command::Validate => vec![cmd_validate(&run)?],
        Command::Schedule => cmd_schedule(&run)?,
        Command::Report => cmd_report(&run)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NumericalFailure>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
