use std::process::ExitCode;

use chain_taylor::cli::{run, Args};
use clap::Parser;

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("chain-taylor: {err}");
            ExitCode::from(err.code as u8)
        }
    }
}
