mod args;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::process::ExitCode;

use anyhow::Result;
use clap::{CommandFactory, FromArgMatches};

use args::Cli;

/// Errors raised by the front end itself (core errors carry their own code).
#[derive(Debug, thiserror::Error)]
#[error("{msg}")]
pub struct CliError {
    pub code: &'static str,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: String) -> Self {
        Self {
            code: "E_USAGE",
            msg,
        }
    }
    pub fn config(msg: String) -> Self {
        Self {
            code: "E_CONFIG",
            msg,
        }
    }
    pub fn validation(msg: String) -> Self {
        Self {
            code: "E_VALIDATION",
            msg,
        }
    }
    pub fn io(msg: String) -> Self {
        Self { code: "E_IO", msg }
    }
}

fn error_code(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mlpl_core::Error>() {
            return e.code();
        }
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.code;
        }
    }
    "E_INTERNAL"
}

fn parse_cli(argv: Vec<OsString>) -> Result<Option<Cli>> {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let (config, sub) = config::scan(&argv, &names);
    if let Some(path) = config {
        let entries = config::load(path.as_ref())?;
        cmd = config::apply(cmd, sub.as_deref(), entries)?;
    }
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(None);
        }
        Err(e) => {
            let text = e.to_string();
            let msg = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            return Err(CliError::usage(msg.trim_start_matches("error: ").to_string()).into());
        }
    };
    Ok(Some(Cli::from_arg_matches(&matches).map_err(|e| {
        CliError::usage(e.to_string().lines().next().unwrap_or("").to_string())
    })?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let result = parse_cli(std::env::args_os().collect()).and_then(|cli| match cli {
        Some(cli) => commands::dispatch(cli).map(|dir| {
            println!("{}", dir.display());
        }),
        None => Ok(()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {msg}", error_code(&e));
            ExitCode::FAILURE
        }
    }
}
