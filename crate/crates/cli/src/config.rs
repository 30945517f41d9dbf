//! `--config` files: one `key = value` per line, `#` comments. Each key
//! names a long flag; flags given on the command line take precedence.

use std::ffi::OsString;

use anyhow::{bail, Context};

fn parse(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key", i + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config PATH` from `argv` and splices the file's flags in
/// after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut args: Vec<OsString> = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                path = Some(it.next().context("--config needs a path")?);
            }
            Some(s) if s.starts_with("--config=") => {
                path = Some(OsString::from(&s["--config=".len()..]));
            }
            _ => args.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let entries = parse(&text).with_context(|| format!("in config {}", path.to_string_lossy()))?;

    let given = |key: &str| {
        let flag = format!("--{key}");
        args.iter().any(|a| {
            a.to_str()
                .is_some_and(|s| s == flag || s.starts_with(&format!("{flag}=")))
        })
    };
    let mut extra = Vec::new();
    for (key, value) in entries {
        if given(&key) {
            continue;
        }
        match value.as_str() {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(value));
            }
        }
    }
    // The subcommand is the first bare word after the program name; only
    // `--threads` takes a value before it.
    let mut at = 1;
    while at < args.len() {
        match args[at].to_str() {
            Some("--threads") => at += 2,
            Some(s) if s.starts_with('-') => at += 1,
            _ => break,
        }
    }
    let insert = (at + 1).min(args.len());
    args.splice(insert..insert, extra);
    Ok(args)
}
