use alloc::vec::Vec;

use rand::Rng;

use super::ModelConfig;
use crate::attention::HalParams;
use crate::embed::{CosineClassifier, EmbeddingHead};
use crate::{Error, Matrix, ParamId, Result};

/// Training stage a model has reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initialized,
    Pretrained,
    MetaTrained,
}

impl Stage {
    pub fn tag(self) -> u8 {
        match self {
            Stage::Initialized => 0,
            Stage::Pretrained => 1,
            Stage::MetaTrained => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Stage> {
        match tag {
            0 => Some(Stage::Initialized),
            1 => Some(Stage::Pretrained),
            2 => Some(Stage::MetaTrained),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Initialized => "initialized",
            Stage::Pretrained => "pretrained",
            Stage::MetaTrained => "meta-trained",
        }
    }
}

/// Every learnable parameter of the pipeline.
///
/// The classifier exists only for stage 1. Attention is created when
/// meta-training with it enabled; a model without it infers with
/// `X^ctx = X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PalModel {
    pub head: EmbeddingHead,
    pub classifier: Option<CosineClassifier>,
    pub hal: Option<HalParams>,
    pub stage: Stage,
}

impl PalModel {
    /// Fresh head and classifier over `classes` meta-training classes.
    pub fn init<R: Rng + ?Sized>(d_raw: usize, classes: usize, cfg: &ModelConfig, rng: &mut R) -> Self {
        let head = EmbeddingHead::init(d_raw, cfg.dim, cfg.head, rng);
        let classifier = (classes > 0).then(|| CosineClassifier::init(classes, cfg.dim, cfg.cosine_scale, rng));
        PalModel {
            head,
            classifier,
            hal: None,
            stage: Stage::Initialized,
        }
    }

    pub fn dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if let Some(c) = &self.classifier {
            if c.weight.cols() != d {
                return Err(Error::shape("classifier", (c.weight.rows(), d), c.weight.shape()));
            }
        }
        if let Some(h) = &self.hal {
            if h.dim() != d || h.latent_dim() != d {
                return Err(Error::Config(alloc::format!(
                    "attention is {}x{} but the feature dimension is {d}",
                    h.dim(),
                    h.latent_dim()
                )));
            }
        }
        if self.params().iter().any(|(_, m)| !m.is_finite()) {
            return Err(Error::Precondition("model has non-finite parameters".into()));
        }
        Ok(())
    }

    /// True once any parameter block is non-finite or so large that its
    /// squared norm overflows; the next forward pass would overflow too.
    pub fn overflowed(&self) -> bool {
        self.params()
            .iter()
            .any(|(_, m)| !m.as_slice().iter().map(|v| v * v).sum::<f64>().is_finite())
    }

    pub fn params(&self) -> Vec<(ParamId, &Matrix)> {
        let mut out = self.head.params();
        if let Some(c) = &self.classifier {
            out.push((ParamId::ClassifierWeight, &c.weight));
        }
        if let Some(h) = &self.hal {
            out.extend(h.params());
        }
        out
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Matrix> {
        match id {
            ParamId::ClassifierWeight => self.classifier.as_mut().map(|c| &mut c.weight),
            id if id.is_attention() => self.hal.as_mut().and_then(|h| h.param_mut(id)),
            id => self.head.param_mut(id),
        }
    }
}
