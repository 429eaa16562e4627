//! `key=value` configuration files. Each key is a long flag of the chosen
//! subcommand; entries are inserted before the command-line flags, which
//! therefore win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::anyhow;

use crate::Failure;

/// Parses config file contents into `--key=value` arguments. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_config(text: &str) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(anyhow!("config line {}: expected key=value, got '{line}'", no + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(Failure::Usage(anyhow!("config line {}: empty key", no + 1)));
        }
        if k == "config" {
            return Err(Failure::Usage(anyhow!("config line {}: nested config files are not supported", no + 1)));
        }
        out.push(format!("--{k}={}", v.trim()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<String>, Failure> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            let v = it.next().ok_or_else(|| Failure::Usage(anyhow!("--config needs a path")))?;
            return Ok(Some(v.to_string_lossy().into_owned()));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Ok(Some(v.to_string()));
        }
    }
    Ok(None)
}

/// Returns `args` with the entries of the `--config` file (if any) spliced in
/// right after the subcommand name.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| Failure::Io(anyhow!("reading config '{path}': {e}")))?;
    let extra = parse_config(&text)?;
    let pos = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| Failure::Usage(anyhow!("a subcommand is required")))?;
    let mut out: Vec<OsString> = args[..pos].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[pos..]);
    Ok(out)
}
