use std::process::ExitCode;

use clap::Parser;
use holeflow_cli::error::CliError;
use holeflow_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if cli.check {
                for c in &outcome.checks {
                    println!("{c}");
                }
                let failed = outcome.failures();
                if !failed.is_empty() {
                    let err = CliError::CheckFailed(failed);
                    eprintln!("error: {err}");
                    return ExitCode::from(err.exit_code());
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
