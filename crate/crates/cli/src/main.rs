use std::process::ExitCode;

use clap::Parser;
use mts_cli::{dispatch, Cli, UsageError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli, std::env::args().collect()) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
