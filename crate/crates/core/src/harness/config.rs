//! Flat `key = value` experiment configs.
//!
//! Keys carry a section prefix (`ppo.gamma`, `attack.mode`). Blank lines and
//! `#` comments are ignored. Every driver publishes a schema of keys with
//! defaults; [`Config::materialize`] rejects unknown keys and writes every
//! default into the config so the saved manifest is complete.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

pub const KIND_KEY: &str = "experiment.kind";
pub const SEED_KEY: &str = "experiment.seed";
pub const OUT_DIR_KEY: &str = "experiment.out_dir";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Attack2p,
    Lmattack,
    Rarl,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Attack2p => "attack2p",
            ExperimentKind::Lmattack => "lmattack",
            ExperimentKind::Rarl => "rarl",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attack2p" => Ok(ExperimentKind::Attack2p),
            "lmattack" => Ok(ExperimentKind::Lmattack),
            "rarl" => Ok(ExperimentKind::Rarl),
            _ => Err(Error::ConfigValue {
                key: KIND_KEY.into(),
                message: format!("unknown experiment kind {s:?} (attack2p, lmattack, rarl)"),
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Source line per key; 0 for keys set programmatically.
    lines: BTreeMap<String, usize>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::ConfigLine {
                    line: i + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::ConfigLine {
                    line: i + 1,
                    message: format!("invalid key {k:?}"),
                });
            }
            if let Some(prev) = cfg.lines.get(k) {
                return Err(Error::ConfigLine {
                    line: i + 1,
                    message: format!("duplicate key {k:?} (first set on line {prev})"),
                });
            }
            cfg.values.insert(k.to_string(), v.to_string());
            cfg.lines.insert(k.to_string(), i + 1);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
        self.lines.entry(key.to_string()).or_insert(0);
    }

    /// Applies a command-line `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.lines.remove(key);
        self.values.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Parses a present key; errors name the key and the bad value.
    pub fn parse_key<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e: T::Err| Error::ConfigValue {
            key: key.to_string(),
            message: format!("{raw:?}: {e}"),
        })
    }

    /// Comma-separated list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim().parse().map_err(|e: T::Err| Error::ConfigValue {
                    key: key.to_string(),
                    message: format!("{s:?}: {e}"),
                })
            })
            .collect()
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.require(KIND_KEY)?.parse()
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse_key(SEED_KEY)
    }

    /// Checks required keys, rejects keys outside `schema`, and fills in
    /// every missing default.
    pub fn materialize(&mut self, schema: &[(&str, String)]) -> Result<()> {
        self.kind()?;
        self.seed()?;
        for (key, line) in &self.lines {
            let known = key == KIND_KEY || key == SEED_KEY || key == OUT_DIR_KEY || schema.iter().any(|(k, _)| k == key);
            if !known {
                let msg = format!("unknown key {key:?}");
                return Err(if *line > 0 {
                    Error::ConfigLine {
                        line: *line,
                        message: msg,
                    }
                } else {
                    Error::InvalidArgument(msg)
                });
            }
        }
        for (k, default) in schema {
            if !self.values.contains_key(*k) {
                self.set(k, default);
            }
        }
        Ok(())
    }

    /// Sorted `key = value` lines; `skip` keys are omitted.
    pub fn to_text(&self, skip: &[&str]) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            if !skip.contains(&k.as_str()) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}
