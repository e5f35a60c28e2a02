// SPDX-License-Identifier: Apache-2.0

//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are lowercase ASCII letters, digits, `_` and `.`. A key may appear
//! once. Each subcommand lists the keys it understands and rejects others.

use std::collections::BTreeMap;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: key `{key}` is set twice (first on line {first})")]
    Duplicate { key: String, line: usize, first: usize },
    #[error("line {line}: unknown key `{key}`")]
    Unknown { key: String, line: usize },
    #[error("line {line}: key `{key}`: {msg}")]
    Value { key: String, line: usize, msg: String },
    #[error("key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'.')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected `key = value`, got `{body}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("invalid key `{k}`"),
                });
            }
            if v.is_empty() {
                return Err(ConfigError::Value {
                    key: k.to_string(),
                    line,
                    msg: "empty value".into(),
                });
            }
            if let Some(first) = entries.get(k) {
                return Err(ConfigError::Duplicate {
                    key: k.to_string(),
                    line,
                    first: first.line,
                });
            }
            entries.insert(
                k.to_string(),
                Entry {
                    value: v.to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    /// Fails on the first key (by line) not in `known`.
    pub fn expect_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        let mut unknown: Vec<(&String, &Entry)> = self
            .entries
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            Some((k, e)) => Err(ConfigError::Unknown {
                key: (*k).clone(),
                line: e.line,
            }),
            None => Ok(()),
        }
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn unknown(&self, key: &str) -> ConfigError {
        ConfigError::Unknown {
            key: key.to_string(),
            line: self.entries.get(key).map_or(0, |e| e.line),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn value_error(&self, key: &str, msg: String) -> ConfigError {
        ConfigError::Value {
            key: key.to_string(),
            line: self.entries.get(key).map_or(0, |e| e.line),
            msg,
        }
    }

    /// Parses `key` if present.
    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| self.value_error(key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// A finite number.
    pub fn number(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get(key, default)?;
        if !v.is_finite() {
            return Err(self.value_error(key, format!("{v} is not finite")));
        }
        Ok(v)
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.number(key, default)?;
        if v <= 0.0 {
            return Err(self.value_error(key, format!("{v} must be positive")));
        }
        Ok(v)
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(self.value_error(key, format!("expected true or false, got `{v}`"))),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|err| self.value_error(key, format!("cannot parse `{s}`: {err}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Error for a value that parsed but is out of range.
    pub fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        match self.entries.get(key) {
            Some(_) => self.value_error(key, msg.into()),
            None => ConfigError::Invalid {
                key: key.to_string(),
                msg: msg.into(),
            },
        }
    }

    /// Keys in sorted order as `key=value` lines.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, e) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(&e.value);
            s.push('\n');
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of `scope`, `canonical()` and
    /// `extra` (input files the run depends on).
    pub fn hash(&self, scope: &str, extra: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(scope.as_bytes());
        h.update(b"\n");
        h.update(self.canonical().as_bytes());
        h.update(extra);
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
