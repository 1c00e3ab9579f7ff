//! `uwchirp` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 detection or
//! decoding failure at run time.

mod args;
mod cmd;

use std::process::ExitCode;

use args::Cmd;

#[derive(Debug)]
pub enum CliError {
    /// Help or version text; not an error.
    Help(String),
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn run() -> Result<(), CliError> {
    let parsed = args::parse(std::env::args_os().collect())?;
    let verbose = match &parsed.cli.cmd {
        Cmd::Modulate(a) => a.common.verbose,
        Cmd::Channel(a) => a.common.verbose,
        Cmd::Demod(a) => a.common.verbose,
        Cmd::Experiment(a) => a.common.verbose,
    };
    if verbose {
        eprint!("{}", parsed.resolved);
    }
    let summary = match &parsed.cli.cmd {
        Cmd::Modulate(a) => cmd::modulate(a)?,
        Cmd::Channel(a) => cmd::channel(a)?,
        Cmd::Demod(a) => cmd::demod(a)?,
        Cmd::Experiment(a) => cmd::experiment(a)?,
    };
    if let Some(s) = summary {
        println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Help(text) => print!("{text}"),
                CliError::Usage(msg) => eprintln!("error: {}", msg.trim_start_matches("error: ").trim_end()),
                CliError::Runtime(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(e.code())
        }
    }
}
