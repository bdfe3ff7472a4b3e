use std::path::PathBuf;
use std::process::ExitCode;

use btgd_cli::{commands, CliError, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "btgd", version, about = "Backtracking gradient descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer and write trajectory.csv and summary.json.
    Run(Common),
    /// Run several optimizers from a shared start and write compare.csv.
    Compare(Common),
    /// Average the per-batch line-search step on the least-squares problem.
    LrFinder(Common),
    /// Estimate the fraction of starts near a saddle that escape it.
    SaddleMc(Common),
    /// Finder output over a grid of batch sizes and starting steps.
    StabilitySweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: btgd-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Objective by name, with default parameters.
    #[arg(long)]
    function: Option<String>,
    /// Optimizer by name, with default parameters. Repeat for `compare`.
    #[arg(long)]
    optimizer: Vec<String>,
    /// Explicit start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z0: Option<Vec<f64>>,
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, cmd): (&Common, fn(&btgd_cli::ExperimentConfig) -> _) = match &cli.command {
        Command::Run(c) => (c, commands::run),
        Command::Compare(c) => (c, commands::compare),
        Command::LrFinder(c) => (c, commands::lr_finder),
        Command::SaddleMc(c) => (c, commands::saddle_mc),
        Command::StabilitySweep(c) => (c, commands::stability_sweep_cmd),
    };
    let mut cfg = commands::load_config(common.config.as_deref())?;
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        function: common.function.clone(),
        optimizers: common.optimizer.clone(),
        z0: common.z0.clone(),
    }
    .apply(&mut cfg)?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("btgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
