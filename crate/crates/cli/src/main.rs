//! `mtasep` command-line front end.
//!
//! Exit codes: 0 success, 2 verification failure, 3 inconclusive,
//! 64 usage error, 65 infeasible input.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, Failure};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Failure::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("mtasep: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
