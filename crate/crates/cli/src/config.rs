//! Score configuration: flat `key=value` files overridden by flags.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use ggsm_vif::pipeline::{AlphaMode, NeuralNoise, ScoreConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => bail!("unknown format {s:?} (expected json or csv)"),
        }
    }
}

/// Everything `score` needs besides the two image paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Config {
    #[serde(flatten)]
    pub score: ScoreConfig,
    pub seed: u64,
    pub format: Format,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            score: ScoreConfig::default(),
            seed: 0,
            format: Format::Json,
        }
    }
}

/// `rel:0.1`, `abs:0.01` or a bare number (relative).
pub fn parse_sigma_n(s: &str) -> anyhow::Result<NeuralNoise> {
    let (kind, v) = match s.split_once(':') {
        Some((k, v)) => (k, v),
        None => ("rel", s),
    };
    let v: f64 = v.trim().parse().with_context(|| format!("bad sigma_n value {s:?}"))?;
    match kind.trim() {
        "rel" => Ok(NeuralNoise::Relative(v)),
        "abs" => Ok(NeuralNoise::Absolute(v)),
        k => bail!("unknown sigma_n mode {k:?} (expected rel or abs)"),
    }
}

fn parse_alpha(s: &str) -> anyhow::Result<AlphaMode> {
    if s.trim() == "estimate" {
        return Ok(AlphaMode::Estimate);
    }
    Ok(AlphaMode::Fixed(s.trim().parse().with_context(|| format!("bad alpha {s:?}"))?))
}

fn num<T: FromStr>(key: &str, v: &str) -> anyhow::Result<T> {
    v.trim().parse().map_err(|_| anyhow!("bad value {v:?} for {key}"))
}

impl Config {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        match key.trim() {
            "levels" => self.score.levels = num(key, value)?,
            "block_side" => self.score.block_side = num(key, value)?,
            "alpha" => self.score.alpha = parse_alpha(value)?,
            "sigma_n" => self.score.neural_noise = parse_sigma_n(value)?,
            "window" => self.score.window = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "format" => self.format = value.trim().parse()?,
            k => bail!("unknown config key {k:?}"),
        }
        Ok(())
    }

    /// Parses a config file body. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
            self.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        self.apply_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_n_forms() {
        assert_eq!(parse_sigma_n("0.2").unwrap(), NeuralNoise::Relative(0.2));
        assert_eq!(parse_sigma_n("rel:0.3").unwrap(), NeuralNoise::Relative(0.3));
        assert_eq!(parse_sigma_n("abs:1e-3").unwrap(), NeuralNoise::Absolute(1e-3));
        assert!(parse_sigma_n("foo:1").is_err());
        assert!(parse_sigma_n("abs:x").is_err());
    }

    #[test]
    fn config_text() {
        let mut c = Config::default();
        c.apply_text("# comment\nlevels = 3\nalpha=estimate\n\nsigma_n=abs:0.5 # trailing\nformat=csv\nseed=9\n")
            .unwrap();
        assert_eq!(c.score.levels, 3);
        assert_eq!(c.score.alpha, AlphaMode::Estimate);
        assert_eq!(c.score.neural_noise, NeuralNoise::Absolute(0.5));
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.seed, 9);
        assert!(c.clone().apply_text("colour=red").is_err());
        assert!(c.clone().apply_text("levels").is_err());
        assert!(c.apply_text("levels=x").is_err());
    }
}
