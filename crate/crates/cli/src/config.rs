//! Plain-text `key=value` run configs.
//!
//! A config file is spliced into the argument list as `--key=value` flags
//! right after the subcommand, so anything given explicitly on the command
//! line (which comes later) overrides it.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::UsageError;

pub const RESOLVED_CONFIG: &str = "config.txt";

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are read as dashes.
pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError(format!(
                "{}:{}: expected key=value, found {line:?}",
                origin.display(),
                n + 1
            ))
            .into());
        };
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(UsageError(format!(
                "{}:{}: config files cannot include other config files",
                origin.display(),
                n + 1
            ))
            .into());
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

/// Inserts the entries of `--config FILE`, if any, after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text, &path)?;
    let Some(sub) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let mut out = args[..=sub].to_vec();
    out.extend(
        entries
            .into_iter()
            .map(|(k, v)| OsString::from(format!("--{k}={v}"))),
    );
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn render(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Array(items) => Some(
            items
                .iter()
                .filter_map(render)
                .collect::<Vec<_>>()
                .join(","),
        ),
        other => Some(other.to_string()),
    }
}

/// Writes the fully resolved arguments of a run as a config file that
/// reproduces it.
pub fn write_resolved<T: Serialize>(dir: &Path, command: &str, args: &T) -> Result<()> {
    let value = serde_json::to_value(args)?;
    let mut text = format!(
        "# prefcomp {command} ({})\n# rerun with: prefcomp {command} --config {RESOLVED_CONFIG}\n",
        env!("PREFCOMP_GIT_DESCRIBE")
    );
    if let serde_json::Value::Object(map) = value {
        for (key, v) in &map {
            if let Some(s) = render(v) {
                writeln!(text, "{key}={s}")?;
            }
        }
    }
    let path = dir.join(RESOLVED_CONFIG);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blanks_and_underscores() {
        let got = parse("# run\nrank = 20\n\nmax_iters=5 # short\n", Path::new("x")).unwrap();
        assert_eq!(
            got,
            vec![
                ("rank".to_string(), "20".to_string()),
                ("max-iters".to_string(), "5".to_string())
            ]
        );
        assert!(parse("rank 20\n", Path::new("x")).is_err());
    }

    #[test]
    fn file_entries_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "rank=20\nlambda=3\n").unwrap();
        let args: Vec<OsString> = [
            "prefcomp",
            "train",
            "--config",
            path.to_str().unwrap(),
            "--rank",
            "5",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let got: Vec<String> = expand_args(args)
            .unwrap()
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        assert_eq!(&got[..4], &["prefcomp", "train", "--rank=20", "--lambda=3"]);
        assert_eq!(&got[6..], &["--rank", "5"]);
    }
}
