//! `key = value` settings files. Blank lines and `#` comments are skipped,
//! an optional `[section]` header is ignored, and values may be quoted.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use secagg_core::Error;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn config_error(msg: String) -> anyhow::Error {
    anyhow!(Error::Config(msg))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_error(format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim().replace('-', "_");
            let val = v.trim().trim_matches('"').to_string();
            if values.insert(key.clone(), val).is_some() {
                return Err(config_error(format!("line {}: duplicate key {key}", lineno + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text)
            }
        }
    }

    /// Typed lookup. Numbers accept `_` separators and `2^k` / `10^k`.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        let text = expand_power(raw).unwrap_or_else(|| raw.replace('_', ""));
        text.parse::<T>()
            .map(Some)
            .map_err(|_| config_error(format!("cannot parse {key} = {raw}")))
    }

    /// Flag value if given, else the file's, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }
}

fn expand_power(raw: &str) -> Option<String> {
    let (base, exp) = raw.trim().split_once('^')?;
    let base: u128 = base.trim().parse().ok()?;
    let exp: u32 = exp.trim().parse().ok()?;
    base.checked_pow(exp).map(|v| v.to_string())
}

/// Parse `2^20`, `10^3`, `1_000` or a plain number from a flag.
pub fn parse_number<T: FromStr>(raw: &str) -> std::result::Result<T, String> {
    let text = expand_power(raw).unwrap_or_else(|| raw.replace('_', ""));
    text.parse::<T>().map_err(|_| format!("not a number: {raw}"))
}
