//! `--config FILE`: a flat JSON object whose keys mirror long flag names.
//!
//! Config entries are spliced into the argument list directly after the
//! subcommand, ahead of the user's own flags. Clap keeps the last occurrence
//! of a flag, so anything given explicitly wins.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

const SUBCOMMANDS: &[&str] = &["gamma", "sweep", "oracle", "qp", "simulate", "ladder", "verify"];
/// Global flags that consume the next argument.
const VALUE_FLAGS: &[&str] = &["--config", "--threads"];

/// Value of `--config` in a raw argument list, if present.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter().skip(1);
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Turns a flat JSON object into `--key value` arguments.
pub fn config_args(json: &str, origin: &Path) -> Result<Vec<OsString>, CliError> {
    let bad = |msg: String| CliError::Usage(format!("config {}: {msg}", origin.display()));
    let value: Value = serde_json::from_str(json).map_err(|e| bad(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(bad("expected a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(bad("config files cannot nest".into()));
        }
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Array(items) => {
                let parts: Result<Vec<String>, CliError> = items
                    .iter()
                    .map(|item| match item {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        other => Err(bad(format!("unsupported list item {other} for {key}"))),
                    })
                    .collect();
                out.push(flag.into());
                out.push(parts?.join(",").into());
            }
            Value::Object(_) => return Err(bad(format!("nested object under {key}"))),
        }
    }
    Ok(out)
}

/// Position just after the subcommand token.
fn subcommand_end(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(i + 1);
        }
        if VALUE_FLAGS.contains(&s.as_ref()) {
            i += 1;
        }
        i += 1;
    }
    None
}

/// Applies `--config` if present; otherwise returns the arguments unchanged.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path).to_path_buf();
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
        context: format!("reading config {}", path.display()),
        source,
    })?;
    let injected = config_args(&text, &path)?;
    let Some(at) = subcommand_end(&args) else {
        return Ok(args);
    };
    let mut out = args[..at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn finds_config_path() {
        assert_eq!(config_path(&os(&["x", "--config", "a.json", "gamma"])), Some("a.json".into()));
        assert_eq!(config_path(&os(&["x", "gamma", "--config=b.json"])), Some("b.json".into()));
        assert_eq!(config_path(&os(&["x", "gamma"])), None);
    }

    #[test]
    fn flat_keys_become_flags() {
        let args = config_args(
            r#"{"mu1": 1, "n_paths": 2000, "bridge": true, "antithetic": false, "u_values": [1, 1.5]}"#,
            Path::new("c.json"),
        )
        .unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        // Keys come out sorted; false booleans are dropped.
        assert_eq!(args, ["--bridge", "--mu1", "1", "--n-paths", "2000", "--u-values", "1,1.5"]);
        assert!(config_args("[1]", Path::new("c.json")).is_err());
        assert!(config_args(r#"{"a": {"b": 1}}"#, Path::new("c.json")).is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let args = os(&["x", "--threads", "2", "gamma", "--rho", "0.5"]);
        assert_eq!(subcommand_end(&args), Some(4));
        // "gamma" as the value of --threads is not mistaken for the subcommand.
        let args = os(&["x", "--threads", "gamma", "qp"]);
        assert_eq!(subcommand_end(&args), Some(4));
    }
}
