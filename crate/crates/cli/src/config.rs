//! Versioned TOML pipeline config. Every field is optional; command-line
//! flags take precedence over the file, the file over built-in defaults.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use motif_mgm::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::{usage, CliError};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 2/2 layers, 2 heads, 64/128; trains on a laptop CPU.
    #[default]
    Desk,
    /// 6/6 layers, 8 heads, 256/2048.
    Full,
}

impl Preset {
    pub fn model(self) -> ModelConfig {
        match self {
            Preset::Desk => ModelConfig::desk(),
            Preset::Full => ModelConfig::full(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtmmSection {
    /// "lexicon" or "command".
    pub provider: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub command: Option<String>,
    pub key: Option<String>,
    pub invert_valence_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub split: Option<Vec<f64>>,
    pub max_len: Option<usize>,
    pub keep_chords: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerSection {
    /// "bar" or "half-bar".
    pub step: Option<String>,
    pub motif_bars: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub preset: Option<Preset>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub temperature: Option<f64>,
    pub bars: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    pub paths: Paths,
    pub ttmm: TtmmSection,
    pub dataset: DatasetSection,
    pub labeler: LabelerSection,
    pub train: TrainSection,
    pub sampling: SamplingSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            paths: Paths::default(),
            ttmm: TtmmSection::default(),
            dataset: DatasetSection::default(),
            labeler: LabelerSection::default(),
            train: TrainSection::default(),
            sampling: SamplingSection::default(),
        }
    }
}

pub const DEFAULT_SPLIT: [f64; 3] = [8.5, 1.0, 0.5];

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.version != CONFIG_VERSION {
            return Err(format!("version {} is not supported (expected {CONFIG_VERSION})", cfg.version));
        }
        if let Some(split) = &cfg.dataset.split {
            normalize_split(split)?;
        }
        Ok(cfg)
    }
}

/// Ratios scaled to sum to one; exactly three positive finite values.
pub fn normalize_split(ratios: &[f64]) -> Result<[f64; 3], String> {
    if ratios.len() != 3 {
        return Err(format!("split needs three ratios (train, valid, test), got {}", ratios.len()));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(format!("split ratios must be positive, got {ratios:?}"));
    }
    let total: f64 = ratios.iter().sum();
    Ok([ratios[0] / total, ratios[1] / total, ratios[2] / total])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = PipelineConfig::parse(
            "version = 1\nseed = 7\n[dataset]\nsplit = [8, 1, 1]\n[train]\npreset = \"full\"\nepochs = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.preset, Some(Preset::Full));
        assert_eq!(cfg.train.epochs, Some(3));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(PipelineConfig::parse("sede = 1").unwrap_err().contains("sede"));
        assert!(PipelineConfig::parse("version = 2").is_err());
        assert!(PipelineConfig::parse("[dataset]\nsplit = [1, 0, 1]").is_err());
    }

    #[test]
    fn split_normalizes() {
        let s = normalize_split(&DEFAULT_SPLIT).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s[0] - 0.85).abs() < 1e-12);
    }
}
