use std::path::Path;

use anyhow::{bail, Context, Result};
use vecdcs::train::{parse_key_values, TrainConfig};

/// Settings shared by every subcommand. Values come from defaults, then the
/// `--config` file, then command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub word_min: f64,
    pub prep_min: f64,
    /// Number of answers printed by `nearest`.
    pub k: usize,
    pub strict_oov: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig { train: TrainConfig::default(), word_min: 1000.0, prep_min: 10000.0, k: 10, strict_oov: false }
    }
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| anyhow::anyhow!("bad value {v:?} for {key}"))
}

impl CliConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "word_min" => self.word_min = value(key, v)?,
            "prep_min" => self.prep_min = value(key, v)?,
            "k" => self.k = value(key, v)?,
            "strict_oov" => self.strict_oov = value(key, v)?,
            "d" => self.train.dim = value(key, v)?,
            _ => {
                if !self.train.set(key, v)? {
                    bail!("unknown config key {key:?}");
                }
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = CliConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            cfg.apply_text(&text).with_context(|| format!("config {}", p.display()))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.word_min >= 0.0 && self.prep_min >= 0.0) {
            bail!("word_min and prep_min must be non-negative");
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        Ok(())
    }
}
