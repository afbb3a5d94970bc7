//! The flat `key = value` text format shared by experiment and synthetic
//! house files. `#` starts a comment; blank lines are ignored; keys may not
//! repeat.

use std::collections::BTreeMap;

use nilm_hpo::Value;

use crate::{Result, RunnerError};

/// Parses `text` into a key-ordered map; values are trimmed strings.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RunnerError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(RunnerError::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(RunnerError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

/// Integer if it parses as one, then float, else string.
pub fn parse_value(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        Value::Int(i)
    } else if let Ok(f) = s.parse::<f64>() {
        Value::Float(f)
    } else {
        Value::Str(s.to_string())
    }
}

/// Comma-separated list; empty items are dropped.
pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

/// Removes and parses `key`, or returns `default` when absent.
pub fn take<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match map.remove(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| RunnerError::Config(format!("`{key}` = `{v}`: {e}"))),
    }
}

pub fn reject_unknown(map: &BTreeMap<String, String>) -> Result<()> {
    match map.keys().next() {
        Some(k) => Err(RunnerError::Config(format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}
