//! JSON study configuration. Every field is optional; command-line flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use simspace::eval::{RmseMode, StudySettings};
use simspace::mapping::RidgeOptions;
use simspace::mds::SmacofConfig;
use simspace::synthetic::SyntheticConfig;
use simspace::Seed;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub features: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
    pub synthetic: Option<SyntheticSection>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub ridge: Option<RidgeOptions>,
    pub rmse_mode: Option<RmseMode>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub groups: usize,
    pub variants: usize,
    pub feature_width: usize,
    pub noise_fraction: f64,
    pub dims: Vec<usize>,
    pub smacof: SmacofConfig,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        SyntheticSection {
            groups: d.groups,
            variants: d.variants,
            feature_width: d.feature_width,
            noise_fraction: d.noise_fraction,
            dims: d.dims,
            smacof: d.smacof,
        }
    }
}

impl SyntheticSection {
    pub fn to_config(&self, seed: Seed) -> SyntheticConfig {
        SyntheticConfig {
            groups: self.groups,
            variants: self.variants,
            feature_width: self.feature_width,
            noise_fraction: self.noise_fraction,
            dims: self.dims.clone(),
            smacof: self.smacof.clone(),
            seed,
        }
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn settings(&self) -> StudySettings {
        let d = StudySettings::default();
        StudySettings {
            runs: self.runs.unwrap_or(d.runs),
            seed: self.seed.map(Seed).unwrap_or(d.seed),
            ridge: self.ridge.unwrap_or(d.ridge),
            rmse_mode: self.rmse_mode.unwrap_or(d.rmse_mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let c: StudyConfig =
            serde_json::from_str(r#"{"runs": 3, "ridge": {"lambda": 2.0}}"#).unwrap();
        let s = c.settings();
        assert_eq!(s.runs, 3);
        assert_eq!(s.ridge.lambda, 2.0);
        assert!(!s.ridge.standardize);
        assert_eq!(s.rmse_mode, RmseMode::PerItem);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<StudyConfig>(r#"{"rnus": 3}"#).is_err());
    }

    #[test]
    fn synthetic_section_defaults() {
        let c: StudyConfig = serde_json::from_str(r#"{"synthetic": {"groups": 10}}"#).unwrap();
        let s = c.synthetic.unwrap();
        assert_eq!(s.groups, 10);
        assert_eq!(s.dims, vec![2, 4, 8]);
    }
}
