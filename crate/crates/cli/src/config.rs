//! Flat `key = value` configuration merged with command-line flags.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {key:?} for {command}")]
    UnknownKey { key: String, command: String },
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
}

/// Normalizes `r-pre`, `r_pre` and `R_PRE` to `r_pre`.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate { line: i + 1, key });
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Raw settings plus a record of every effective value handed out, which
/// becomes the input echo of the run.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    echo: RefCell<BTreeMap<String, String>>,
}

impl Settings {
    /// File values overridden by flag values.
    pub fn merged(file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Self {
        let mut values = file;
        values.extend(flags);
        Self {
            values,
            echo: RefCell::default(),
        }
    }

    pub fn check_known(&self, command: &str, known: &[&str]) -> Result<(), ConfigError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(key) => Err(ConfigError::UnknownKey {
                key: key.clone(),
                command: command.to_string(),
            }),
            None => Ok(()),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn parse<V: FromStr>(&self, key: &str, raw: &str) -> Result<V, ConfigError>
    where
        V::Err: Display,
    {
        raw.parse().map_err(|e: V::Err| ConfigError::Value {
            key: key.to_string(),
            value: raw.to_string(),
            reason: e.to_string(),
        })
    }

    /// Value of `key`, or `default`; the effective value is echoed.
    pub fn get<V: FromStr + Display>(&self, key: &str, default: V) -> Result<V, ConfigError>
    where
        V::Err: Display,
    {
        let value = match self.values.get(key) {
            Some(raw) => self.parse(key, raw)?,
            None => default,
        };
        self.echo.borrow_mut().insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn get_opt<V: FromStr + Display>(&self, key: &str) -> Result<Option<V>, ConfigError>
    where
        V::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => {
                let value: V = self.parse(key, raw)?;
                self.echo.borrow_mut().insert(key.to_string(), value.to_string());
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    /// Comma-separated list.
    pub fn get_list<V: FromStr + Display>(&self, key: &str, default: &[V]) -> Result<Vec<V>, ConfigError>
    where
        V::Err: Display,
        V: Clone,
    {
        let values = match self.values.get(key) {
            Some(raw) => raw
                .split(',')
                .map(|s| self.parse(key, s.trim()))
                .collect::<Result<Vec<V>, _>>()?,
            None => default.to_vec(),
        };
        let text = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.echo.borrow_mut().insert(key.to_string(), text);
        Ok(values)
    }

    pub fn echo(&self) -> BTreeMap<String, String> {
        self.echo.borrow().clone()
    }
}

/// First 16 hex digits of the SHA-256 of the canonical echo.
pub fn config_hash(command: &str, echo: &BTreeMap<String, String>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("command = {command}\n"));
    for (k, v) in echo {
        hasher.update(format!("{k} = {v}\n"));
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_spacing() {
        let map = parse_config("# header\nr-pre = 1.0\n  lambda=1.24   # coupling\n\n").unwrap();
        assert_eq!(map["r_pre"], "1.0");
        assert_eq!(map["lambda"], "1.24");
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(parse_config("lambda 1.0"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("a=1\na=2"), Err(ConfigError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("n = 100\nalpha = 0.5").unwrap();
        let flags = BTreeMap::from([("n".to_string(), "200".to_string())]);
        let s = Settings::merged(file, flags);
        assert_eq!(s.get("n", 0usize).unwrap(), 200);
        assert_eq!(s.get("alpha", 0.0f64).unwrap(), 0.5);
        assert_eq!(s.get("dt", 0.05f64).unwrap(), 0.05);
        assert_eq!(s.echo()["dt"], "0.05");
        assert!(s.check_known("x", &["n", "alpha"]).is_ok());
        assert!(s.check_known("x", &["n"]).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let echo = BTreeMap::from([("a".to_string(), "1".to_string())]);
        assert_eq!(config_hash("q", &echo), config_hash("q", &echo.clone()));
        assert_ne!(config_hash("q", &echo), config_hash("p", &echo));
        assert_eq!(config_hash("q", &echo).len(), 16);
    }
}
