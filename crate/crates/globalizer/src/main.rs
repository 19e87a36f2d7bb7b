use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = globalizer::cli::Cli::parse();
    match globalizer::cli::execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
