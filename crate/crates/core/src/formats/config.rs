//! Plain-text `key = value` configuration files.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored.
//! Keys are `[a-z0-9_]+`. Unknown and repeated keys are errors.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parsed entries in key order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical text: sorted `key = value` lines.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses `text`, accepting only keys listed in `allowed`.
pub fn parse_key_values(text: &str, allowed: &[&str]) -> Result<KeyValues> {
    let mut out = KeyValues::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Format(format!("line {}: expected key = value", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty()
            || !key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        {
            return Err(Error::Format(format!("line {}: invalid key {key:?}", lineno + 1)));
        }
        if !allowed.contains(&key) {
            return Err(Error::Format(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if out.entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Format(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(out)
}
