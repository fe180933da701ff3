use std::process::ExitCode;

use clap::Parser;
use maser_bloch_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maser-bloch: {e}");
            ExitCode::from(e.code())
        }
    }
}
