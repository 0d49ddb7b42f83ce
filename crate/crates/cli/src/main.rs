use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use downwash_cli::{pipeline, CliError, RunConfig};

/// Aggregate downwash experiments: generate sweeps, train models, evaluate.
#[derive(Parser)]
#[command(name = "downwash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set sweep.legs=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output root, overriding `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Global seed, overriding `seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate every configured dataset.
    Gen,
    /// Fit the naive model and train the learnt models.
    Train {
        /// Dataset CSVs to use instead of the configured mix.
        datasets: Vec<PathBuf>,
    },
    /// Write the per-axis benchmark table.
    Eval {
        /// Model names, `oracle:<name>` or model files; all three models by default.
        models: Vec<String>,
    },
    /// Write slice profiles, contour grids and their summary.
    Report {
        /// Model names, `oracle:<name>` or model files; all three models by default.
        models: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.set;
    if let Some(out) = &cli.out {
        overrides.push(format!("out={}", toml::Value::String(out.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Gen => pipeline::cmd_gen(&cfg)?,
        Command::Train { datasets } => pipeline::cmd_train(&cfg, &datasets)?,
        Command::Eval { models } => pipeline::cmd_eval(&cfg, &models)?,
        Command::Report { models } => pipeline::cmd_report(&cfg, &models)?,
    };
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
