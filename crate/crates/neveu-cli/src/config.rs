//! Plain-text key-value configuration with section headers, mirroring the
//! CLI flags. Precedence: explicit CLI flag > config file value > built-in
//! default, with the NEVEU_SEED environment variable overriding the seed
//! from either source.
//!
//! ```text
//! # comment
//! [simulate]
//! beta = 1.0
//! paths = 10000
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("global");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {} is neither `[section]` nor `key = value`: {raw}", lineno + 1);
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    /// Raw string lookup: section first, then the global section.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .or_else(|| self.sections.get("global").and_then(|m| m.get(key)))
            .map(|s| s.as_str())
    }

    /// Parsed lookup; "inf" is accepted for unbounded thresholds.
    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => Ok(Some(parse_f64(s).with_context(|| {
                format!("config [{section}] {key} = {s}")
            })?)),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => Ok(Some(s.parse::<u64>().with_context(|| {
                format!("config [{section}] {key} = {s}")
            })?)),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => match s {
                "true" | "on" | "yes" | "1" => Ok(Some(true)),
                "false" | "off" | "no" | "0" => Ok(Some(false)),
                other => bail!("config [{section}] {key}: not a boolean: {other}"),
            },
        }
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .with_context(|| format!("not a number: {other}")),
    }
}

/// Seed resolution: NEVEU_SEED env > CLI flag > config > default.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>, default: u64) -> Result<u64> {
    if let Ok(env) = std::env::var("NEVEU_SEED") {
        return env
            .parse::<u64>()
            .with_context(|| format!("NEVEU_SEED must be an integer, got {env}"));
    }
    Ok(cli.or(config).unwrap_or(default))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = ConfigFile::parse(
            "# top comment\n[simulate]\nbeta = 1.5\npaths = 200\n\n[sweep]\nt-max = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.get_f64("simulate", "beta").unwrap(), Some(1.5));
        assert_eq!(cfg.get_u64("simulate", "paths").unwrap(), Some(200));
        assert_eq!(cfg.get_f64("sweep", "t-max").unwrap(), Some(2.0));
        assert_eq!(cfg.get_f64("simulate", "missing").unwrap(), None);
    }

    #[test]
    fn global_section_backs_every_command() {
        let cfg = ConfigFile::parse("seed = 7\n[simulate]\nbeta = 1.0\n").unwrap();
        assert_eq!(cfg.get_u64("simulate", "seed").unwrap(), Some(7));
        assert_eq!(cfg.get_u64("sweep", "seed").unwrap(), Some(7));
    }

    #[test]
    fn inf_is_accepted() {
        let cfg = ConfigFile::parse("[simulate]\nb = inf\n").unwrap();
        assert_eq!(cfg.get_f64("simulate", "b").unwrap(), Some(f64::INFINITY));
    }

    #[test]
    fn malformed_lines_error() {
        assert!(ConfigFile::parse("not a kv line\n").is_err());
    }
}
