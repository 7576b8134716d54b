//! Flat `key = value` config files, spliced into argv ahead of the
//! subcommand's own flags so explicit flags take precedence.

use std::path::Path;

use clap::CommandFactory;

use crate::cli::Cli;
use crate::error::{CliError, CliResult};
use crate::fsutil::read_to_string;

const GLOBAL_VALUED: [&str; 2] = ["--config", "--workers"];

/// Parses `key = value` lines. `#` starts a comment; keys may use `_` or
/// `-`.
pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config` and the subcommand position in raw argv.
fn scan(argv: &[String]) -> (Option<String>, Option<usize>) {
    let mut config = None;
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if a == "--config" {
            config = argv.get(i + 1).cloned();
            i += 1;
        } else if GLOBAL_VALUED.iter().any(|g| a == g) {
            i += 1;
        } else if !a.starts_with('-') {
            // keep scanning past the subcommand for a later --config
            let sub = i;
            for j in i + 1..argv.len() {
                if let Some(v) = argv[j].strip_prefix("--config=") {
                    config = Some(v.to_string());
                } else if argv[j] == "--config" {
                    config = argv.get(j + 1).cloned();
                }
            }
            return (config, Some(sub));
        }
        i += 1;
    }
    (config, None)
}

/// Returns argv with config entries for the chosen subcommand inserted
/// right after its name. Keys no subcommand knows are an error; keys
/// belonging to other subcommands are ignored so one file can drive the
/// whole pipeline.
pub fn inject_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let (Some(path), Some(sub_pos)) = scan(&argv) else {
        return Ok(argv);
    };
    let entries = parse_config(&read_to_string(Path::new(&path))?)?;
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let known = |cmd: &clap::Command, key: &str| {
        cmd.get_arguments().find(|a| a.get_long() == Some(key)).map(|a| {
            matches!(a.get_action(), clap::ArgAction::SetTrue)
        })
    };
    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        if key == "workers" {
            extra.push("--workers".to_string());
            extra.push(value);
            continue;
        }
        match known(sub, &key) {
            Some(true) => match value.as_str() {
                "true" | "yes" | "1" => extra.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(CliError::Usage(format!("config key `{key}` expects true or false")))
                }
            },
            Some(false) => extra.push(format!("--{key}={value}")),
            None if root.get_subcommands().any(|c| known(c, &key).is_some()) => {}
            None => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}
