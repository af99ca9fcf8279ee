//! Flat key-value configuration: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

/// A resolved configuration. Keys match the long flag names.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Config(pub BTreeMap<String, String>);

impl Config {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Self {
        Config(defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    /// Overlays `pairs`, rejecting keys the command does not define.
    pub fn overlay<I, K, V>(&mut self, pairs: I, origin: &str) -> Result<(), CliError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        for (k, v) in pairs {
            let k = k.into();
            match self.0.get_mut(&k) {
                Some(slot) => *slot = v.into(),
                None => return Err(CliError::Usage(format!("unknown key `{k}` in {origin}"))),
            }
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.get_str(key);
        raw.parse()
            .map_err(|_| CliError::Usage(format!("cannot parse `{key}` = `{raw}`")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.get_str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Usage(format!("cannot parse `{s}` in list `{key}`")))
            })
            .collect()
    }

    pub fn get_bool(&self, key: &str) -> Result<bool, CliError> {
        match self.get_str(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" | "" => Ok(false),
            other => Err(CliError::Usage(format!("`{key}` = `{other}` is not a boolean"))),
        }
    }

    /// SHA-256 of the command name and the sorted `key=value` lines.
    pub fn digest(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        for (k, v) in &self.0 {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
