//! Command-line front end: configuration, sequence inputs, run manifests and
//! the subcommands built on `mts-core`.

pub mod args;
pub mod commands;
pub mod config;
pub mod inputs;
pub mod manifest;
pub mod overlay;

use anyhow::Result;
use clap::Parser;

pub use args::Cli;
pub use commands::{execute, rerun, Outcome, UsageError};
pub use config::RunConfig;

/// Runs an already parsed command line.
pub fn dispatch(cli: &Cli, invocation: Vec<String>) -> Result<Outcome> {
    match (&cli.command, cli.resolve()?) {
        (args::Cmd::Rerun(r), _) => rerun(&r.manifest, cli.out.clone(), invocation),
        (_, Some(config)) => execute(&config, invocation),
        (_, None) => unreachable!("only rerun lacks a configuration"),
    }
}

/// Parses `argv` (program name first) and runs the selected command.
pub fn run_from<I, T>(argv: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let invocation = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| UsageError(e.to_string()))?;
    dispatch(&cli, invocation)
}
