//! Two-stage optimisation: supervised pretraining of the embedding head with
//! a cosine classifier, then episodic meta-training of the head together with
//! hybrid attention, plus few-shot evaluation.

mod config;
mod eval;
mod meta;
mod model;
mod pretrain;
mod sgd;

pub use config::{EpisodeShape, MetaConfig, ModelConfig, PretrainConfig, StepSchedule, TrainConfig};
pub use eval::{evaluate, evaluate_episode, EpisodeOutcome, EvalReport, EvalSettings, Separation};
pub use meta::meta_train;
pub use model::{PalModel, Stage};
pub use pretrain::pretrain;
pub use sgd::Sgd;

/// Per-epoch training record. Stage 1 fills `loss_total` with the
/// cross-entropy and leaves the episodic terms empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_meta: Option<f64>,
    pub loss_pcc: Option<f64>,
    pub loss_total: f64,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
}
