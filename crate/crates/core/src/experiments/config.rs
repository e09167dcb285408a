//! Sectioned `key = value` configuration text.
//!
//! ```text
//! [params]
//! p0 = 80
//! [power-sweep]
//! powers = p0, p0/2, p0/4, 0
//! ```
//! Numeric values are expressions over `pi`, the `[params]` symbols and keys
//! defined earlier in the same section.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{eval_expr, DslError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {key} (line {line}): {source}")]
    Value { section: String, key: String, line: usize, source: DslError },
    #[error("[{section}] {key} (line {line}): {msg}")]
    Invalid { section: String, key: String, line: usize, msg: String },
    #[error("unknown key `{key}` in [{section}] (line {line})")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub raw: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, Vec<Entry>>,
    params: BTreeMap<String, f64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, msg: "unterminated section header".into() })?;
                current = name.trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected `key = value`, found `{body}`") })?;
            let key = k.trim().to_string();
            if key.is_empty() || !key.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax { line, msg: format!("invalid key `{key}`") });
            }
            if current.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "key outside of a section".into() });
            }
            let entry = Entry { key: key.clone(), raw: v.trim().to_string(), line };
            if current == "params" {
                let value = eval_expr(&entry.raw, &cfg.params).map_err(|source| ConfigError::Value {
                    section: current.clone(),
                    key: key.clone(),
                    line,
                    source,
                })?;
                cfg.params.insert(key.clone(), value);
            }
            let list = cfg.sections.entry(current.clone()).or_default();
            list.retain(|e| e.key != key);
            list.push(entry);
        }
        Ok(cfg)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.iter().find(|e| e.key == key)
    }

    /// Symbols visible to a value: `[params]` plus numeric keys defined earlier
    /// in the same section.
    fn symbols(&self, section: &str, before_line: usize) -> BTreeMap<String, f64> {
        let mut sym = self.params.clone();
        if let Some(list) = self.sections.get(section) {
            for e in list.iter().filter(|e| e.line < before_line) {
                if let Ok(v) = eval_expr(&e.raw, &sym) {
                    sym.insert(e.key.clone(), v);
                }
            }
        }
        sym
    }

    pub fn string(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.raw.as_str())
    }

    pub fn number(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let sym = self.symbols(section, e.line);
        eval_expr(&e.raw, &sym).map(Some).map_err(|source| ConfigError::Value {
            section: section.into(),
            key: key.into(),
            line: e.line,
            source,
        })
    }

    pub fn number_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.number(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list of expressions.
    pub fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let sym = self.symbols(section, e.line);
        e.raw
            .split(',')
            .map(|part| {
                eval_expr(part.trim(), &sym).map_err(|source| ConfigError::Value {
                    section: section.into(),
                    key: key.into(),
                    line: e.line,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn boolean(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        match e.raw.as_str() {
            "true" | "yes" | "on" | "1" => Ok(Some(true)),
            "false" | "no" | "off" | "0" => Ok(Some(false)),
            other => Err(ConfigError::Invalid {
                section: section.into(),
                key: key.into(),
                line: e.line,
                msg: format!("expected true or false, found `{other}`"),
            }),
        }
    }

    /// Rejects keys of `section` not in `allowed`.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<(), ConfigError> {
        if let Some(list) = self.sections.get(section) {
            if let Some(e) = list.iter().find(|e| !allowed.contains(&e.key.as_str())) {
                return Err(ConfigError::UnknownKey { section: section.into(), key: e.key.clone(), line: e.line });
            }
        }
        Ok(())
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(|s| s.as_str())
    }
}
