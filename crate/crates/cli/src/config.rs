//! Flat `key = value` config files merged under command-line flags.

use std::fs;
use std::path::Path;

use specklab_core::{Error, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// keys may be written with or without the leading `--`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value, got '{line}'", n + 1)))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", n + 1)));
        }
        out.push((key, v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Turns config entries into flag arguments. Boolean `true` becomes a bare
/// flag, `false` drops it.
pub fn config_args(entries: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

fn config_path(args: &[String]) -> Option<(usize, usize, String)> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).map(|p| (i, 2, p.clone()))
        } else {
            a.strip_prefix("--config=").map(|p| (i, 1, p.to_string()))
        }
    })
}

/// Rewrites `argv` so that entries from `--config <file>` come right after
/// the subcommand name, ahead of the explicit flags that override them.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some((pos, len, path)) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(Path::new(&path)).map_err(|e| Error::Io { path: path.clone().into(), source: e })?;
    let entries = parse_config(&text)?;
    let mut rest = argv;
    rest.drain(pos..pos + len);
    let sub = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1);
    let Some(sub) = sub else {
        return Err(Error::Config("--config needs a subcommand".into()));
    };
    let mut out: Vec<String> = rest[..=sub].to_vec();
    out.extend(config_args(&entries));
    out.extend_from_slice(&rest[sub + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_flat_entries() {
        let e = parse_config("# run\nlambda-l1 = 70\n\n--seed=3\nshared-field = true\n").unwrap();
        assert_eq!(e, vec![("lambda-l1".into(), "70".into()), ("seed".into(), "3".into()), ("shared-field".into(), "true".into())]);
        assert!(parse_config("nonsense").is_err());
        assert_eq!(config_args(&e), s(&["--lambda-l1", "70", "--seed", "3", "--shared-field"]));
        assert!(config_args(&[("x".into(), "false".into())]).is_empty());
    }

    #[test]
    fn file_entries_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "seed = 1\nniter = 5\n").unwrap();
        let argv = s(&["specklab", "--config", p.to_str().unwrap(), "train", "--seed", "9"]);
        let out = expand_config(argv).unwrap();
        assert_eq!(out, s(&["specklab", "train", "--seed", "1", "--niter", "5", "--seed", "9"]));
    }
}
