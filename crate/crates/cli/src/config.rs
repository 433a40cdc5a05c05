//! Flat `key = value` run configuration.
//!
//! Values are resolved in three layers: built-in defaults, then the config
//! file, then command-line flags. The resolved map is written next to every
//! command's outputs so a run can be repeated from its output directory alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Every recognised key and its default; an empty default means "unset".
const KEYS: &[(&str, &str)] = &[
    ("alpha", "1"),
    ("batch_size", "64"),
    ("configs", "20"),
    ("dataset", ""),
    ("dropout", "0.5"),
    ("embedding_dim", "300"),
    ("embeddings", ""),
    ("epochs", "10"),
    ("filters", "200"),
    ("fit_intercept", "false"),
    ("hidden", "170"),
    ("k", "15"),
    ("kernel", "5"),
    ("lr", "0.001"),
    ("max_len", ""),
    ("max_word_len", ""),
    ("min_count", "400"),
    ("min_freq", "1"),
    ("mlp_activations", ""),
    ("mlp_hidden", ""),
    ("modality", ""),
    ("model", ""),
    ("n_train", ""),
    ("out", "out"),
    ("policy", ""),
    ("remove_stopwords", ""),
    ("scores", ""),
    ("seed", "0"),
    ("skill_profile", ""),
    ("split", "test"),
    ("stopwords", ""),
    ("strip_digits", ""),
    ("strip_punct", ""),
    ("tau", "0.5"),
    ("temperature", "0.25"),
    ("tokens", ""),
    ("vocab", ""),
];

/// Keys naming input files, checked for existence once resolved.
const INPUT_PATHS: &[&str] = &["dataset", "embeddings", "model", "scores", "skill_profile", "stopwords", "tokens", "vocab"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults, overlaid with `file` (if any), overlaid with `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            for (key, value) in parse(&text).with_context(|| format!("in config {}", path.display()))? {
                values.insert(key, value);
            }
        }
        for (key, value) in overrides {
            check_key(key)?;
            values.insert(key.clone(), value.clone());
        }
        let cfg = RunConfig { values };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for key in INPUT_PATHS {
            if let Some(path) = self.path(key) {
                if !path.exists() {
                    bail!("{key}: {} does not exist", path.display());
                }
            }
        }
        let seed = self.raw("seed");
        if seed.parse::<u64>().is_err() {
            bail!("seed must be an unsigned 64-bit integer, got `{seed}`");
        }
        let tau: f64 = self.get("tau")?;
        if !(tau > 0.0 && tau < 1.0) {
            bail!("tau must lie strictly between 0 and 1, got {tau}");
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    /// The value of `key`, or `None` when unset.
    pub fn opt<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            "" => Ok(None),
            v => v.parse().map(Some).map_err(|e| anyhow::anyhow!("{key} = {v}: {e}")),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.opt(key)?.with_context(|| format!("`{key}` is required"))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        Some(self.raw(key)).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).with_context(|| format!("`{key}` is required (flag --{} or config key)", key.replace('_', "-")))
    }

    /// Comma-separated list; empty when unset.
    pub fn list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            "" => Ok(Vec::new()),
            v => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| anyhow::anyhow!("{key} = {v}: {e}")))
                .collect(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    /// The resolved configuration in config-file syntax, unset keys omitted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.values.iter().filter(|(_, v)| !v.is_empty()) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Creates the output directory and writes `<command>.config` into it.
    pub fn echo(&self, command: &str) -> Result<PathBuf> {
        let dir = self.out_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{command}.config"));
        std::fs::write(&path, self.to_text()).with_context(|| format!("writing {}", path.display()))?;
        Ok(dir)
    }
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        bail!("unknown config key `{key}`")
    }
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim();
        check_key(key).with_context(|| format!("line {}", i + 1))?;
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_override_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "# comment\nlr = 0.01\nepochs=3\n").unwrap();
        let cfg = RunConfig::resolve(Some(&file), &[("epochs".into(), "7".into())]).unwrap();
        assert_eq!(cfg.get::<f64>("lr").unwrap(), 0.01);
        assert_eq!(cfg.get::<usize>("epochs").unwrap(), 7);
        assert_eq!(cfg.get::<usize>("batch_size").unwrap(), 64);
        assert_eq!(cfg.opt::<usize>("n_train").unwrap(), None);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::resolve(None, &[("alpha".into(), "0.1".into())]).unwrap();
        let again = RunConfig::resolve(None, &parse(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("lr 0.1").is_err());
        assert!(parse("learning_rate = 0.1").is_err());
        assert!(RunConfig::resolve(None, &[("tau".into(), "1".into())]).is_err());
        assert!(RunConfig::resolve(None, &[("seed".into(), "-1".into())]).is_err());
        assert!(RunConfig::resolve(None, &[("dataset".into(), "/no/such/file".into())]).is_err());
        assert_eq!(RunConfig::resolve(None, &[]).unwrap().list::<usize>("mlp_hidden").unwrap(), Vec::<usize>::new());
    }
}
