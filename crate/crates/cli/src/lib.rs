//! Command-line front end: CSV in, aligned text or JSON out.
//!
//! Exit codes: 0 success, 1 usage, 2 bad data, 3 numerical failure
//! (including a fit that stopped before converging).

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod model;
pub mod render;

use args::{Cli, Command};
use clap::error::ErrorKind as ClapKind;
use clap::Parser;
use error::{CliError, ErrorKind};
use std::ffi::OsString;

/// Version of every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let msg = e.render().to_string();
                    eprintln!("{}", CliError::usage(msg.trim_end()).to_json());
                    ErrorKind::Usage.exit_code()
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.kind.exit_code()
        }
    }
}
