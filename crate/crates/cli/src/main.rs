use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield_cli::config::SEED_ENV;
use meanfield_cli::{execute, Invocation, Pipeline};

#[derive(Parser)]
#[command(name = "meanfield", version, about = "Mean-field particle systems with vanishing noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run config; every field has a default.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a config field, e.g. `--set sim.n=256`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; replaces `output` from the config.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Euler-Maruyama particle paths, marginals and moment diagnostics.
    Simulate,
    /// Noiseless hydrodynamic flow, its current and weak-form residuals.
    Limit,
    /// Fourier coefficients of the stochastic current and distance to the limit.
    Current,
    /// Minimal control energy for each configured target.
    Rate,
    /// Laplace functional estimate and variational upper bounds.
    Laplace,
    /// Laplace estimates and bounds along a particle-count schedule.
    Scan,
    /// Check the config and the model's declared Lipschitz constant.
    Validate,
}

impl From<Command> for Pipeline {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Pipeline::Simulate,
            Command::Limit => Pipeline::Limit,
            Command::Current => Pipeline::Current,
            Command::Rate => Pipeline::Rate,
            Command::Laplace => Pipeline::Laplace,
            Command::Scan => Pipeline::Scan,
            Command::Validate => Pipeline::Validate,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let inv = Invocation {
        config: cli.config,
        overrides: cli.overrides,
        out_dir: cli.out,
        seed_env: std::env::var(SEED_ENV).ok(),
    };
    let outcome = execute(cli.command.into(), &inv);
    if outcome.code == 0 {
        log::info!("{}", outcome.message);
    } else {
        log::error!("{}", outcome.message);
    }
    if let Some(dir) = &outcome.out_dir {
        log::info!("artifacts in {}", dir.display());
    }
    ExitCode::from(outcome.code as u8)
}
