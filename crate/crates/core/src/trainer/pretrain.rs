use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EpochLog, PalModel, Sgd, Stage, TrainConfig};
use crate::data::{sample_frames, Dataset, Split};
use crate::embed::pretrain_forward_backward;
use crate::{Error, Result};

/// Supervised stage: shuffled mini-batches of the frame-averaged cosine
/// cross-entropy over every meta-training class. Only the head and the
/// classifier are updated.
///
/// On a non-finite loss the run stops with [`Error::Diverged`] carrying the
/// last finite batch loss; `model` itself is never modified.
pub fn pretrain<R: Rng + ?Sized>(
    model: &PalModel,
    ds: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(PalModel, Vec<EpochLog>)> {
    if ds.split() != Split::MetaTrain {
        return Err(Error::Precondition(format!(
            "pretraining needs the meta-train split, got {}",
            ds.split().name()
        )));
    }
    let classes = model
        .classifier
        .as_ref()
        .map(|c| c.classes())
        .ok_or_else(|| Error::Precondition("pretraining needs a classifier".into()))?;
    if classes != ds.classes().len() {
        return Err(Error::Precondition(format!(
            "classifier has {classes} classes, dataset has {}",
            ds.classes().len()
        )));
    }
    if ds.d_raw() != model.head.input_dim() {
        return Err(Error::shape("pretrain", (ds.d_raw(), 0), (model.head.input_dim(), 0)));
    }
    let pc = &cfg.pretrain;
    if pc.batch_size == 0 {
        return Err(Error::Config("pretrain batch size must be >= 1".into()));
    }

    let mut model = model.clone();
    let mut opt = Sgd::new(pc.momentum, pc.weight_decay);
    let mut logs = Vec::with_capacity(pc.epochs);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut last_finite = f64::NAN;
    let mut steps = 0usize;

    for epoch in 0..pc.epochs {
        let lr = pc.schedule.lr(epoch);
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (step, chunk) in order.chunks(pc.batch_size).enumerate() {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let s = &ds.samples()[i];
                    Ok((sample_frames(s, cfg.model.segments, rng)?, s.label as usize))
                })
                .collect::<Result<Vec<_>>>()?;
            let clf = model.classifier.as_ref().expect("checked above");
            let out = pretrain_forward_backward(&model.head, clf, &batch)?;
            if !out.loss.is_finite() || !out.grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_finite_loss: last_finite,
                });
            }
            last_finite = out.loss;
            loss_sum += out.loss * batch.len() as f64;
            correct += out.correct;
            opt.step(&mut model, &out.grads, lr, |id| {
                id.is_head() || id == crate::ParamId::ClassifierWeight
            })?;
            if model.overflowed() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_finite_loss: last_finite,
                });
            }
            steps += 1;
        }
        let n = ds.len().max(1) as f64;
        logs.push(EpochLog {
            epoch,
            lr,
            loss_meta: None,
            loss_pcc: None,
            loss_total: loss_sum / n,
            train_acc: Some(correct as f64 / n),
            val_acc: None,
        });
    }
    if steps > 0 {
        model.stage = Stage::Pretrained;
    }
    Ok((model, logs))
}
