use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tpc_cli::commands::{self, print_table};
use tpc_cli::{CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "tpc",
    version,
    about = "Tensor dictionary learning and dictionary-based CT reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Replace a config value, e.g. `recon.mu=0.05` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Extract training patches.
    Extract,
    /// Learn a dictionary at the configured λ.
    Learn,
    /// Learn over a λ grid and keep the best trade-off.
    Sweep,
    /// Simulate clean and noisy sinograms.
    Simulate,
    /// Reconstruct with the configured prior.
    Reconstruct,
    /// Mean approximation error of the dictionary on the exact image.
    Mae,
    /// Tikhonov baseline and both priors, as a comparison table.
    Evaluate,
}

fn run(cli: &Cli) -> CliResult<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| tpc_cli::CliError::Config("--config <file> is required".into()))?;
    let cfg = RunConfig::load(path, &cli.overrides)?;
    match cli.command {
        Command::Extract => {
            let m = commands::cmd_extract(&cfg)?;
            println!("extracted t = {} patches of {}x{}", m.t, m.p, m.r);
        }
        Command::Learn => {
            let m = commands::cmd_learn(&cfg)?;
            println!(
                "learned s = {} at lambda = {}: {} iterations, converged = {}, H all zero = {}",
                m.s, m.lambda, m.iterations, m.converged, m.h_all_zero
            );
        }
        Command::Sweep => {
            let (rows, selected) = commands::cmd_sweep(&cfg)?;
            for r in &rows {
                println!(
                    "lambda = {:<10} residual = {:.6e}  H_sum = {:.6e}  criterion = {:.6e}",
                    r.lambda, r.residual_fro, r.h_sum, r.criterion
                );
            }
            println!("selected lambda = {selected}");
        }
        Command::Simulate => {
            let m = commands::cmd_simulate(&cfg)?;
            println!(
                "simulated m = {} measurements, relative noise {:.6e}",
                m.m, m.realized_noise_level
            );
        }
        Command::Reconstruct => {
            let r = commands::cmd_reconstruct(&cfg)?;
            print_table(io::stdout().lock(), std::slice::from_ref(&r))?;
        }
        Command::Mae => {
            let s = commands::cmd_mae(&cfg)?;
            println!("MAE = {:.6e} over q = {} patches (s = {})", s.mae, s.q, s.s);
        }
        Command::Evaluate => {
            let rows = commands::cmd_evaluate(&cfg)?;
            print_table(io::stdout().lock(), &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tpc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
