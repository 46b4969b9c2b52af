use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::embed::HeadConfig;
use crate::objective::{ObjectiveConfig, PccMode};
use crate::{Error, ParamId, Result};

/// Step-decay learning rate: `lr0 * gamma^(number of milestones <= epoch)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StepSchedule {
    pub lr0: f64,
    pub gamma: f64,
    pub milestones: Vec<usize>,
}

impl StepSchedule {
    /// Decay by `gamma` every `period` epochs for a run of `epochs` epochs.
    pub fn every(lr0: f64, gamma: f64, period: usize, epochs: usize) -> Self {
        StepSchedule {
            lr0,
            gamma,
            milestones: (1..).map(|i| i * period).take_while(|&m| m < epochs).collect(),
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let drops = self.milestones.iter().filter(|&&m| m <= epoch).count();
        let mut lr = self.lr0;
        for _ in 0..drops {
            lr *= self.gamma;
        }
        lr
    }

    pub fn validate(&self, epochs: usize, what: &str) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("{what}: learning rate must be > 0")));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("{what}: decay factor must be > 0")));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("{what}: decay epochs must be strictly increasing")));
        }
        if let Some(&m) = self.milestones.iter().find(|&&m| m == 0 || (epochs > 0 && m >= epochs)) {
            return Err(Error::Config(format!(
                "{what}: decay epoch {m} outside 1..{epochs}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct EpisodeShape {
    pub way: usize,
    pub shot: usize,
    pub query: usize,
}

impl Default for EpisodeShape {
    fn default() -> Self {
        EpisodeShape { way: 5, shot: 1, query: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelConfig {
    /// Feature dimension `d`, also the attention latent dimension.
    pub dim: usize,
    pub head: HeadConfig,
    /// Multiplier on every cosine score before a softmax.
    pub cosine_scale: f64,
    /// Frames sampled per video.
    pub segments: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            head: HeadConfig::default(),
            cosine_scale: 1.0,
            segments: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PretrainConfig {
    pub epochs: usize,
    pub schedule: StepSchedule,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 70,
            schedule: StepSchedule::every(0.001, 0.1, 30, 70),
            batch_size: 16,
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MetaConfig {
    pub epochs: usize,
    pub schedule: StepSchedule,
    pub episodes_per_epoch: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Train and infer with hybrid attention; off means `X^ctx = X`.
    pub hal: bool,
    /// Weight of the prototype-centred term.
    pub lambda: f64,
    pub pcc_mode: PccMode,
    /// Parameters excluded from updates.
    pub frozen: Vec<ParamId>,
    /// Meta-val episodes per epoch for model selection; 0 disables it.
    pub val_episodes: usize,
    pub val_seed: u64,
    /// Allow meta-training a model that never went through pretraining.
    pub from_scratch: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig::short_schedule()
    }
}

impl MetaConfig {
    /// 10 epochs, decays at 5, 7 and 9.
    pub fn short_schedule() -> Self {
        MetaConfig {
            epochs: 10,
            schedule: StepSchedule {
                lr0: 1e-4,
                gamma: 0.1,
                milestones: vec![5, 7, 9],
            },
            episodes_per_epoch: 200,
            momentum: 0.0,
            weight_decay: 0.0,
            hal: true,
            lambda: 1.0,
            pcc_mode: PccMode::Exp,
            frozen: Vec::new(),
            val_episodes: 0,
            val_seed: 0x5eed_0a11,
            from_scratch: false,
        }
    }

    /// 35 epochs, decays at 15 and 30.
    pub fn long_schedule() -> Self {
        MetaConfig {
            epochs: 35,
            schedule: StepSchedule {
                lr0: 1e-4,
                gamma: 0.1,
                milestones: vec![15, 30],
            },
            ..MetaConfig::short_schedule()
        }
    }
}

/// Every hyper-parameter of a run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub episode: EpisodeShape,
    pub pretrain: PretrainConfig,
    pub meta: MetaConfig,
}

impl TrainConfig {
    /// Settings tuned for the desk-scale synthetic benchmark: a cosine
    /// scale of 10 and larger learning rates than the defaults.
    pub fn synthetic() -> Self {
        TrainConfig {
            model: ModelConfig {
                dim: 64,
                cosine_scale: 10.0,
                ..ModelConfig::default()
            },
            episode: EpisodeShape::default(),
            pretrain: PretrainConfig {
                epochs: 20,
                schedule: StepSchedule::every(0.05, 0.1, 15, 20),
                batch_size: 16,
                ..PretrainConfig::default()
            },
            meta: MetaConfig {
                schedule: StepSchedule {
                    lr0: 0.001,
                    gamma: 0.1,
                    milestones: vec![5, 7, 9],
                },
                ..MetaConfig::short_schedule()
            },
        }
    }

    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            scale: self.model.cosine_scale,
            lambda: self.meta.lambda,
            pcc_mode: self.meta.pcc_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.dim == 0 || m.segments == 0 {
            return Err(Error::Config("model dim and segments must be >= 1".into()));
        }
        if !(m.cosine_scale >= 0.0 && m.cosine_scale.is_finite()) {
            return Err(Error::Config("cosine scale must be finite and >= 0".into()));
        }
        let e = &self.episode;
        if e.way < 2 || e.shot == 0 || e.query == 0 {
            return Err(Error::Config(format!(
                "episodes need way >= 2, shot >= 1, query >= 1 (got {}/{}/{})",
                e.way, e.shot, e.query
            )));
        }
        self.pretrain.schedule.validate(self.pretrain.epochs, "pretrain")?;
        self.meta.schedule.validate(self.meta.epochs, "meta")?;
        if self.pretrain.batch_size == 0 {
            return Err(Error::Config("pretrain batch size must be >= 1".into()));
        }
        for (what, v) in [
            ("pretrain momentum", self.pretrain.momentum),
            ("pretrain weight decay", self.pretrain.weight_decay),
            ("meta momentum", self.meta.momentum),
            ("meta weight decay", self.meta.weight_decay),
            ("lambda", self.meta.lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}
