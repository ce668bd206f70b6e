//! `hypermode` command-line tool.
//!
//! Exit codes: 0 success, 1 a negative finding (not hyperbolic, verifier
//! failure, CFL collapse), 2 invalid input.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check(a) => commands::check(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Degeneracy(a) => commands::degeneracy(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
