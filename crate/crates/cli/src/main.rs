use std::process::ExitCode;

use clap::Parser;
use gsvin_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match gsvin_cli::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
