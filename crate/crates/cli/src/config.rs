//! `key = value` config files. Each key names a flag (dashes or
//! underscores) and supplies its default, so explicit flags still win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

use crate::CliError;

pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(CliError::config(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            bail!(CliError::config(format!(
                "{}:{}: empty key",
                path.display(),
                i + 1
            )));
        }
        out.push((key, value));
    }
    Ok(out)
}

/// Finds `--config` and the subcommand name in the raw arguments, before
/// clap sees them.
pub fn scan(argv: &[OsString], subcommands: &[&str]) -> (Option<OsString>, Option<String>) {
    let mut config = None;
    let mut sub = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = it.next().cloned();
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(v.into());
        } else if sub.is_none() && subcommands.contains(&s.as_ref()) {
            sub = Some(s.into_owned());
        }
    }
    (config, sub)
}

/// Installs config entries as defaults on the root command (shared flags)
/// or on `sub`.
pub fn apply(
    mut cmd: Command,
    sub: Option<&str>,
    entries: Vec<(String, String)>,
) -> Result<Command> {
    for (key, value) in entries {
        if key == "config" {
            bail!(CliError::config(
                "a config file cannot name another config file".into()
            ));
        }
        if cmd.get_arguments().any(|a| a.get_id() == key.as_str()) {
            cmd = cmd.mut_arg(key.as_str(), |a| a.default_value(value).required(false));
            continue;
        }
        let target = sub
            .and_then(|s| cmd.find_subcommand(s))
            .filter(|s| s.get_arguments().any(|a| a.get_id() == key.as_str()))
            .map(|s| s.get_name().to_string());
        let Some(name) = target else {
            bail!(CliError::config(format!(
                "config key `{key}` is not a flag of `{}`",
                sub.unwrap_or("mlpl")
            )));
        };
        cmd = cmd.mut_subcommand(name, |s| {
            s.mut_arg(key.as_str(), |a| a.default_value(value).required(false))
        });
    }
    Ok(cmd)
}

pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
        .context("reading config")?;
    parse(&text, path)
}
