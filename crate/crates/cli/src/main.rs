use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pgmult", version, about = "Stick-breaking multinomial models with Polya-gamma augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model described by a JSON config and write results, diagnostics and a manifest.
    Run { config: PathBuf },
    /// Write a synthetic or tokenized dataset described by a JSON config.
    Gen { config: PathBuf },
    /// Run the built-in invariant suite.
    Selfcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => pgmult_cli::run(&config).map(|p| println!("{}", p.display())),
        Command::Gen { config } => pgmult_cli::gen(&config).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
        Command::Selfcheck => pgmult_cli::selfcheck().map(|report| print!("{report}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pgmult: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
