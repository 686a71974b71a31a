use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod experiments;
mod runner;
mod table;

/// Numerical laboratory for thermal states of spin lattices.
#[derive(Parser)]
#[command(name = "gibbslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Worker threads for independent grid points.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List registered experiments.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in &experiments::REGISTRY {
                println!("{} → {}\n    {}", e.name, e.anchor, e.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, workers, out, seed } => {
            match runner::run(&config, &runner::RunOptions { workers, out, seed }) {
                Ok(art) => {
                    for w in &art.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("wrote {} rows to {} ({})", art.rows, art.csv.display(), art.manifest.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(runner::exit_code(&e))
                }
            }
        }
    }
}
