//! Flat `key=value` config files.
//!
//! Each key names a long flag of the chosen subcommand (`k=3` is `--k 3`,
//! `report_format=csv` is `--report-format csv`). Config entries are spliced
//! in front of the command-line flags, and since every subcommand lets a
//! repeated flag override the earlier one, flags win over the file.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", i + 1);
        };
        let key = k.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns config entries into flags. `true`/`false` values toggle switches;
/// comma lists stay as one value for flags that split on commas.
pub fn config_to_args(entries: &[(String, String)]) -> Vec<OsString> {
    let mut args = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => args.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{k}").into());
                args.push(v.into());
            }
        }
    }
    args
}

/// Removes `--config <path>` from `argv` and splices the file's entries in
/// right after the subcommand name.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let p = it.next().context("--config needs a path")?;
            path = Some(p);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let extra = config_to_args(&parse_config(&text)?);
    // argv[0] is the binary; the first non-flag after it is the subcommand.
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    let tail = rest.split_off(sub);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_entries() {
        let e = parse_config("# comment\nk = 3\n\nreport_format=csv\nnormalize=true\n").unwrap();
        assert_eq!(
            e,
            vec![
                ("k".into(), "3".into()),
                ("report-format".into(), "csv".into()),
                ("normalize".into(), "true".into())
            ]
        );
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("=1\n").is_err());
    }

    #[test]
    fn switches() {
        let args = config_to_args(&[("normalize".into(), "true".into()), ("zh-char-split".into(), "false".into())]);
        assert_eq!(args, os(&["--normalize"]));
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "k=2\ncompressor=uniavg\n").unwrap();
        let argv = os(&["audiotok", "compress", "--config", cfg.to_str().unwrap(), "--k", "3"]);
        let out = expand_config(argv).unwrap();
        assert_eq!(out, os(&["audiotok", "compress", "--k", "2", "--compressor", "uniavg", "--k", "3"]));
    }

    #[test]
    fn no_config_is_passthrough() {
        let argv = os(&["audiotok", "info", "a.atcf"]);
        assert_eq!(expand_config(argv.clone()).unwrap(), argv);
    }
}
