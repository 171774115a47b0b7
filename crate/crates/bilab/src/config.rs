//! Flat key=value experiment configuration.  Lines are `key = value`; `#`
//! starts a comment.  Every key must be consumed by the experiment that runs;
//! leftovers are reported by name so typos cannot silently change a run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", idx + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    idx + 1
                )));
            }
        }
        Ok(Config {
            entries,
            consumed: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Snapshot of every entry, for echoing into reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.clone()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key);
        if v.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        v.map(String::as_str)
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn require_str(&self, key: &str) -> Result<String> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not an integer"))),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number"))),
        }
    }

    /// A strictly positive tolerance or scale.
    pub fn get_positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get_f64(key, default)?;
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::Config(format!(
                "key `{key}` must be positive, got {v}"
            )));
        }
        Ok(v)
    }

    /// Comma-separated list of integers.
    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("key `{key}`: `{s}` is not an integer")))
                })
                .collect(),
        }
    }

    /// Semicolon-separated list of `i,j` node pairs.
    pub fn get_node_list(
        &self,
        key: &str,
        default: &[(usize, usize)],
    ) -> Result<Vec<(usize, usize)>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(';')
                .map(|pair| {
                    let mut it = pair.split(',');
                    let bad =
                        || Error::Config(format!("key `{key}`: `{pair}` is not an `i,j` pair"));
                    let i = it
                        .next()
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(bad)?;
                    let j = it
                        .next()
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(bad)?;
                    if it.next().is_some() {
                        return Err(bad());
                    }
                    Ok((i, j))
                })
                .collect(),
        }
    }

    /// Fail if any key was never consumed by a getter.
    pub fn ensure_consumed(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for key in self.entries.keys() {
            if !consumed.contains(key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }
}
