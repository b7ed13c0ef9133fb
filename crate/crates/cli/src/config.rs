//! `--config FILE` support.
//!
//! The file is a JSON object whose keys are long flag names (`n_init` or `n-init`).
//! Its entries are spliced into the argument list directly after the subcommand, so
//! anything given explicitly on the command line comes later and wins.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde_json::Value;

const SUBCOMMANDS: [&str; 5] = ["synth", "dist", "cluster", "diagnose", "report"];
const GLOBALS_WITH_VALUE: [&str; 2] = ["--threads", "--config"];

pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("{}: invalid json", path.display()))?;
    let Value::Object(map) = value else {
        bail!("{}: config must be a json object", path.display());
    };
    let mut injected = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => injected.push(OsString::from(flag)),
            Value::Number(n) => injected.push(OsString::from(format!("{flag}={n}"))),
            Value::String(s) => injected.push(OsString::from(format!("{flag}={s}"))),
            _ => bail!("{}: value of {key:?} must be a scalar", path.display()),
        }
    }
    let mut out = argv;
    out.splice(at + 1..at + 1, injected);
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut args = argv.iter().skip(1);
    while let Some(a) = args.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return args.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if GLOBALS_WITH_VALUE.contains(&a.as_ref()) {
            i += 2;
            continue;
        }
        if SUBCOMMANDS.contains(&a.as_ref()) {
            return Some(i);
        }
        i += 1;
    }
    None
}
