//! Flat key=value run configuration.
//!
//! Every command reads an optional config file of `key = value` lines (`#`
//! starts a comment) and accepts one command-line flag per key with the same
//! spelling; flags override file entries. The fully resolved settings —
//! including defaults — are what lands in the run manifest, so a manifest is
//! always a complete recipe for reproducing the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use seqdet::{Error, Result};

/// Key/value pairs from a config file, validated against a command's known
/// key set at load time so typos fail fast instead of being ignored.
#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>, allowed_keys: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Self { entries });
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidParameter(format!(
                    "{} line {}: expected `key = value`, got `{raw}`",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !allowed_keys.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "{} line {}: unknown key `{key}` (known keys: {})",
                    path.display(),
                    idx + 1,
                    allowed_keys.join(", ")
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "{} line {}: duplicate key `{key}`",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self { entries })
    }
}

/// Merges flag values over config-file values over defaults, recording the
/// effective value of every key for the manifest.
pub struct Resolver {
    cfg: ConfigMap,
    effective: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(cfg: ConfigMap) -> Self {
        Self { cfg, effective: BTreeMap::new() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.cfg.entries.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(key: &str, s: &str) -> Result<T>
    where
        T::Err: Display,
    {
        s.parse().map_err(|e| Error::InvalidParameter(format!("key `{key}`: bad value `{s}`: {e}")))
    }

    /// A key with a default: flag > config file > default.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let value = match (flag, self.raw(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => Self::parse(key, s)?,
            (None, None) => default,
        };
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// A key that must be supplied by flag or config file.
    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        let value = match (flag, self.raw(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => Self::parse(key, s)?,
            (None, None) => {
                return Err(Error::InvalidParameter(format!(
                    "missing required key `{key}` (pass --{key} or set it in the config file)"
                )))
            }
        };
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// A key that may be absent; absent keys are omitted from the manifest.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        let value = match (flag, self.raw(key)) {
            (Some(v), _) => Some(v),
            (None, Some(s)) => Some(Self::parse(key, s)?),
            (None, None) => None,
        };
        if let Some(v) = &value {
            self.effective.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Resolved settings for the manifest.
    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.effective
    }

    /// Extra manifest entry that is derived rather than user-supplied
    /// (e.g. the contents of a referenced spec file).
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.effective.insert(key.to_string(), value.to_string());
    }
}

/// Comma-separated list of `T`.
pub fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse().map_err(|e| {
                Error::InvalidParameter(format!("key `{key}`: bad list element `{p}`: {e}"))
            })
        })
        .collect()
}
