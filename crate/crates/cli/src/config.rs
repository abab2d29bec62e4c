//! Folding a TOML config file into the command line.
//!
//! Top-level keys set global flags and a table named after the subcommand
//! sets that subcommand's flags, e.g.
//!
//! ```toml
//! seed = 7
//!
//! [synth]
//! n = 2000
//! prior = "dirichlet:0.5"
//! ```
//!
//! Keys are flag names with `-` or `_`. A flag given on the command line
//! always wins over the file.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use toml::{Table, Value};

use crate::error::{CliError, Result};

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        _ => None,
    }
}

fn render(v: &Value) -> Option<String> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(scalar)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        other => scalar(other),
    }
}

/// Flags to append so that `file` supplies every value the command line
/// left at its default.
fn extra_flags(
    path: &Path,
    file: &Table,
    root: &Command,
    sub_name: &str,
    sub_matches: &ArgMatches,
) -> Result<Vec<OsString>> {
    let err = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let sub = root
        .find_subcommand(sub_name)
        .expect("matched subcommand exists");
    let mut entries: Vec<(&String, &Value)> = Vec::new();
    for (key, value) in file {
        match value {
            Value::Table(section) => {
                if key == sub_name {
                    entries.extend(section.iter());
                } else if root.find_subcommand(key).is_none() {
                    return Err(err(format!("unknown section [{key}]")));
                }
            }
            _ => entries.push((key, value)),
        }
    }

    let mut out = Vec::new();
    for (key, value) in entries {
        let id = key.replace('-', "_");
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_id() == id.as_str() && a.get_long().is_some())
            .ok_or_else(|| err(format!("unknown key `{key}` for {sub_name}")))?;
        if id == "config" {
            return Err(err("a config file cannot name another config file".into()));
        }
        if sub_matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = arg.get_long().expect("checked above");
        match value {
            Value::Boolean(true) => out.push(format!("--{long}").into()),
            Value::Boolean(false) => {}
            v => {
                let text =
                    render(v).ok_or_else(|| err(format!("unsupported value for `{key}`")))?;
                out.push(format!("--{long}={text}").into());
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with flags from the `--config` file appended, or `argv`
/// unchanged when no config file was named.
pub fn apply(argv: Vec<OsString>, root: &Command, matches: &ArgMatches) -> Result<Vec<OsString>> {
    let Some((sub_name, sub_matches)) = matches.subcommand() else {
        return Ok(argv);
    };
    let Some(path) = sub_matches.get_one::<std::path::PathBuf>("config") else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config {
            path: path.clone(),
            message: e.to_string(),
        })?;
    let mut argv = argv;
    argv.extend(extra_flags(path, &file, root, sub_name, sub_matches)?);
    Ok(argv)
}
