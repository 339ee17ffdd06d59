//! `cse` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.

mod args;
mod commands;
mod output;
mod svg;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{CommandFactory, Parser};
use serde_json::Value;

use cse_core::ErrorKind;

use args::{Cli, Command, SUBCOMMANDS};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Splices the key/value pairs of a `--config` JSON object into `argv`
/// right after the subcommand, so explicit flags (which come later) win.
fn apply_config_overlay(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a file argument")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    let Value::Object(map) = value else {
        return Err(format!("{path}: expected a flat JSON object"));
    };
    let pos = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .ok_or("--config requires a subcommand")?;
    let root = Cli::command();
    let sub = root
        .find_subcommand(&rest[pos])
        .ok_or("--config requires a subcommand")?;
    let mut flags = Vec::new();
    for (key, v) in map {
        let long = key.replace('_', "-");
        let takes_value = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()))
            .is_none_or(|a| a.get_action().takes_values());
        let flag = format!("--{long}");
        match v {
            Value::Bool(b) if takes_value => flags.extend([flag, b.to_string()]),
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => flags.extend([flag, s]),
            Value::Number(n) => flags.extend([flag, n.to_string()]),
            Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                flags.extend([flag, joined.join(",")]);
            }
            Value::Object(_) => return Err(format!("{path}: nested value for `{key}`")),
        }
    }
    rest.splice(pos + 1..pos + 1, flags);
    Ok(rest)
}

fn main() -> ExitCode {
    let argv = match apply_config_overlay(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let result = pool.install(|| match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Km(a) => commands::km(a),
        Command::Embed(a) => commands::embed(a),
        Command::Decompose(a) => commands::decompose_cmd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Rate(a) => commands::rate(a),
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Usage => EXIT_USAGE,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_inserts_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"B": 20, "sizes": [100, 200], "linear_truth": true, "curves": "c.csv"}"#,
        )
        .unwrap();
        let argv: Vec<String> = ["cse", "rate", "--config", path.to_str().unwrap(), "--B", "30"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = apply_config_overlay(argv).unwrap();
        assert_eq!(out[..2], ["cse", "rate"]);
        assert_eq!(out.last().unwrap(), "30");
        assert!(out.contains(&"--sizes".to_string()));
        assert!(out.contains(&"100,200".to_string()));
        let cli = Cli::try_parse_from(out).unwrap();
        match cli.command {
            Command::Rate(r) => {
                assert_eq!(r.model.runs, 30);
                assert_eq!(r.sizes, vec![100, 200]);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
