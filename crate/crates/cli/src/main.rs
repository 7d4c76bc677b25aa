mod args;
mod commands;
mod config;
mod lock;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

use args::Cli;
use commands::{dispatch, CliError};

const EXIT_REJECT: u8 = 2;
const EXIT_FAULT: u8 = 1;
const EXIT_USAGE: u8 = 64;

/// A closed stdout (e.g. piped into `head`) is not an error worth reporting.
fn emit(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("json value serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match dispatch(cli) {
        Ok(v) => {
            emit(&v);
            ExitCode::SUCCESS
        }
        Err(CliError::Reject(v)) => {
            emit(&v);
            ExitCode::from(EXIT_REJECT)
        }
        Err(CliError::Failed(v)) => {
            emit(&v);
            ExitCode::from(EXIT_FAULT)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            emit(&json!({ "result": "error", "kind": "usage", "message": msg }));
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Fault(msg)) => {
            eprintln!("error: {msg}");
            emit(&json!({ "result": "error", "kind": "fault", "message": msg }));
            ExitCode::from(EXIT_FAULT)
        }
    }
}
