//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may be written
//! with `-` or `_`; both map to the same setting. Explicit command-line flags
//! take precedence over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "arch",
    "final_activation",
    "lr",
    "epochs",
    "batch_size",
    "margin",
    "momentum",
    "threshold",
    "max_iter",
    "rollback_tol",
    "retrain_epochs",
    "side",
    "norm",
    "points",
    "per_point",
    "dim",
    "sigma",
    "train",
    "val",
    "data",
    "model",
    "ubc_dir",
    "pairs",
    "name",
    "roc",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let key = normalize_key(k);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Usage(format!("config line {}: unknown key '{key}'", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Usage(format!("config key '{key}': cannot parse '{v}'")))
            })
            .transpose()
    }

    /// Flag value, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.pick_opt(flag, key)?
            .ok_or_else(|| Error::Usage(format!("missing required setting '--{}'", key.replace('_', "-"))))
    }
}
