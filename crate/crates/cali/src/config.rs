//! Plain `key=value` run configuration.
//!
//! Values come from an optional config file and from `--key value` flags;
//! flags win. Every key must be declared by the command.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::{io_err, Error, Result};

/// A key accepted by a command. Keys without a default are required unless
/// the command treats them as optional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn key(key: &'static str, default: Option<&'static str>, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

/// Parses config text into ordered `(key, value, line)` triples.
pub fn parse_text(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Usage(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

/// Resolved values of one command invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    specs: Vec<KeySpec>,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Merges defaults, then the config file, then flags.
    pub fn resolve(command: &str, specs: &[KeySpec], file: Option<&Path>, flags: &[(String, String)]) -> Result<Self> {
        let known = |k: &str| specs.iter().any(|s| s.key == k);
        let mut values = BTreeMap::new();
        for s in specs {
            if let Some(d) = s.default {
                values.insert(s.key.to_string(), d.to_string());
            }
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            for (k, v, line) in parse_text(&text)? {
                if !known(&k) {
                    return Err(Error::Usage(format!("{}:{line}: unknown key {k:?} for {command}", path.display())));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if !known(k) {
                return Err(Error::Usage(format!("unknown key {k:?} for {command}")));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(Self {
            command: command.to_string(),
            specs: specs.to_vec(),
            values,
        })
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        debug_assert!(self.specs.iter().any(|s| s.key == key), "undeclared key {key}");
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.get_opt(key)
            .ok_or_else(|| Error::Usage(format!("{}: missing required key --{key}", self.command)))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key)?;
        v.parse()
            .map_err(|e| Error::Usage(format!("{}: bad value {v:?} for {key}: {e}", self.command)))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get_opt(key) {
            Some(_) => self.parse(key).map(Some),
            None => Ok(None),
        }
    }

    /// Records a value chosen at run time (e.g. a preset default) so the
    /// resolved copy is complete.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Resolved copy in declaration order; re-running with it as
    /// `--config` reproduces the run.
    pub fn to_text(&self) -> String {
        let mut s = format!("# resolved configuration for `cali {}`\n", self.command);
        for spec in &self.specs {
            if let Some(v) = self.values.get(spec.key) {
                s.push_str(&format!("{}={v}\n", spec.key));
            }
        }
        s
    }
}
