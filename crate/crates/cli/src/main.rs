mod args;
mod commands;
mod manifest;
mod output;

use std::process::ExitCode;

use anyhow::anyhow;
use clap::Parser;

use args::Cli;
use commands::Failure;
use manifest::RunManifest;

fn resolve(cli: Cli) -> Result<RunManifest, Failure> {
    let (command, args) = cli.command.split();
    match args.manifest.clone() {
        Some(path) => {
            let m = RunManifest::load(&path).map_err(Failure::Usage)?;
            if m.command != command {
                return Err(Failure::Usage(anyhow!(
                    "manifest {} belongs to '{}', not '{}'",
                    path.display(),
                    m.command.name(),
                    command.name()
                )));
            }
            Ok(m)
        }
        None => args.into_manifest(command).map_err(Failure::Usage),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match resolve(cli).and_then(|m| commands::execute(&m)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
