use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = ctmle::cli::Cli::parse();
    match ctmle::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
