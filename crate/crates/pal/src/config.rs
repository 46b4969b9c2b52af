//! Run configuration: one TOML file with a section per concern.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use pal_core::data::{Split, SyntheticSpec};
use pal_core::trainer::{EpisodeShape, MetaConfig, ModelConfig, PretrainConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{PalError, Result};

/// Generator settings for the three class-disjoint splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_classes: usize,
    pub val_classes: usize,
    pub test_classes: usize,
    pub per_class: usize,
    pub d_raw: usize,
    pub frames: usize,
    pub sigma_between: f64,
    pub sigma_within: f64,
    pub outlier_fraction: f64,
    pub outlier_scale: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let b = SyntheticSpec::benchmark(20, 0, Split::MetaTrain);
        DataConfig {
            train_classes: 20,
            val_classes: 5,
            test_classes: 5,
            per_class: b.per_class,
            d_raw: b.d_raw,
            frames: b.frames,
            sigma_between: b.sigma_between,
            sigma_within: b.sigma_within,
            outlier_fraction: b.outlier_fraction,
            outlier_scale: b.outlier_scale,
        }
    }
}

impl DataConfig {
    /// Generator specs for meta-train, meta-val and meta-test, with class
    /// indices offset so the splits never share a class.
    pub fn specs(&self) -> [SyntheticSpec; 3] {
        let spec = |classes, class_offset, split| SyntheticSpec {
            classes,
            per_class: self.per_class,
            d_raw: self.d_raw,
            frames: self.frames,
            sigma_between: self.sigma_between,
            sigma_within: self.sigma_within,
            outlier_fraction: self.outlier_fraction,
            outlier_scale: self.outlier_scale,
            class_offset,
            split,
        };
        [
            spec(self.train_classes, 0, Split::MetaTrain),
            spec(self.val_classes, self.train_classes, Split::MetaVal),
            spec(self.test_classes, self.train_classes + self.val_classes, Split::MetaTest),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Number of consecutive seeds starting at `--seed`.
    pub seeds: usize,
    pub shots: Vec<usize>,
    pub eval_episodes: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seeds: 5,
            shots: vec![1, 5],
            eval_episodes: 1000,
        }
    }
}

/// Everything a command needs besides paths and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub episode: EpisodeShape,
    pub pretrain: PretrainConfig,
    pub meta: MetaConfig,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    /// The synthetic benchmark preset.
    fn default() -> Self {
        RunConfig::from_train(DataConfig::default(), TrainConfig::synthetic())
    }
}

impl RunConfig {
    pub fn from_train(data: DataConfig, t: TrainConfig) -> Self {
        RunConfig {
            data,
            model: t.model,
            episode: t.episode,
            pretrain: t.pretrain,
            meta: t.meta,
            eval: EvalConfig::default(),
            ablation: AblationConfig::default(),
        }
    }

    /// Training hyper-parameters and training-stage presets at the values
    /// stated for the original video benchmarks.
    pub fn reference() -> Self {
        RunConfig::from_train(DataConfig::default(), TrainConfig::default())
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            model: self.model.clone(),
            episode: self.episode,
            pretrain: self.pretrain.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PalError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Read `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| PalError::io(p, e))?;
                toml::from_str(&text).map_err(|e| PalError::parse(p, e))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.train_classes == 0 || d.test_classes == 0 {
            return Err(PalError::Config("train_classes and test_classes must be >= 1".into()));
        }
        for spec in self.data.specs().iter().filter(|s| s.classes > 0) {
            spec.validate()?;
        }
        self.train().validate()?;
        if self.ablation.shots.contains(&0) {
            return Err(PalError::Config("ablation shots must be >= 1".into()));
        }
        Ok(())
    }
}

/// FNV-1a over the canonical TOML of the training settings.
pub fn fingerprint(cfg: &TrainConfig) -> u64 {
    let text = toml::to_string(cfg).expect("config serializes");
    let mut h = fnv::FnvHasher::default();
    h.write(text.as_bytes());
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        let r = RunConfig::reference();
        assert_eq!(RunConfig::from_toml(&r.to_toml()).unwrap(), r);
        c.validate().unwrap();
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c = RunConfig::from_toml("[meta]\nlambda = 0.0\n[episode]\nway = 5\nshot = 5\nquery = 3\n").unwrap();
        assert_eq!(c.meta.lambda, 0.0);
        assert_eq!(c.episode.shot, 5);
        assert_eq!(c.model, RunConfig::default().model);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[meta]\nlamda = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
        assert!(RunConfig::from_toml("[meta]\npcc_mode = \"cubic\"\n").is_err());
        let c = RunConfig::from_toml("[meta]\npcc_mode = \"literal\"\nfrozen = [\"hal.w_v\"]\n").unwrap();
        assert_eq!(c.meta.frozen, vec![pal_core::ParamId::AttnValue]);
    }

    #[test]
    fn fingerprint_tracks_training_settings_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.eval.episodes = 5;
        assert_eq!(fingerprint(&a.train()), fingerprint(&b.train()));
        b.meta.lambda = 0.5;
        assert_ne!(fingerprint(&a.train()), fingerprint(&b.train()));
    }
}
