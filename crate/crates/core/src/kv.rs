//! `key=value` text used by sidecar, scoring and scenario config files.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key:?}")]
    Value { line: usize, key: String, value: String },
}

/// Parsed entries, keyed by name, each remembering its line number.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(KvError::Syntax { line: i + 1, text: raw.to_string() });
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(KvError::Syntax { line: i + 1, text: raw.to_string() });
            }
            if entries.insert(key.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(KvError::Duplicate { line: i + 1, key: key.to_string() });
            }
        }
        Ok(KvFile { entries })
    }

    /// Fail on the first key not in `allowed`.
    pub fn restrict(&self, allowed: &[&str]) -> Result<(), KvError> {
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(KvError::UnknownKey { line: *line, key: key.clone() });
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| KvError::Value { line: *line, key: key.to_string(), value: v.clone() }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, KvError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(KvError::Value { line: *line, key: key.to_string(), value: v.clone() }),
            },
        }
    }

    pub fn invalid(&self, key: &str) -> KvError {
        let (line, value) = self.entries.get(key).cloned().unwrap_or((0, String::new()));
        KvError::Value { line, key: key.to_string(), value }
    }
}
