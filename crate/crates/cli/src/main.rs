use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prp_cli::{experiments, CliError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "prp", version, about = "Utility/privacy trade-off experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear-cost benchmark comparing the optimization schemes.
    Toy(RunArgs),
    /// Convex solve over a fixed grid of actions.
    Grid(RunArgs),
    /// Difference-of-convex scheme on linear-cost instances.
    Dca(RunArgs),
    /// Repeated-auction strategies at given privacy weights.
    Auctions(RunArgs),
    /// Repeated-auction strategies over a log-spaced grid of privacy weights.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file or the manifest of an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of runs.
    #[arg(long)]
    runs: Option<usize>,
}

fn execute(kind: &str, args: RunArgs) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.kind() != kind {
        return Err(CliError::Config(format!(
            "{} describes a {} experiment, not {kind}",
            args.config.display(),
            config.kind()
        )));
    }
    config.apply(&Overrides {
        seed: args.seed,
        out: args.out,
        runs: args.runs,
    });
    let out = config
        .out()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out").join(kind));
    let files = experiments::run(&config, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Toy(a) => ("toy", a),
        Command::Grid(a) => ("grid", a),
        Command::Dca(a) => ("dca", a),
        Command::Auctions(a) => ("auctions", a),
        Command::Sweep(a) => ("sweep", a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
