use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{evaluate, EpochLog, EvalSettings, PalModel, Sgd, Stage, TrainConfig};
use crate::attention::HalParams;
use crate::data::{sample_episode, Dataset, Split};
use crate::pipeline::{episode_loss, EpisodeInput};
use crate::{Error, Result};

/// Episodic stage: one SGD step per sampled episode on the combined loss,
/// updating the head and (when enabled) the attention projections. The
/// classifier is left untouched.
///
/// With a meta-val dataset and `val_episodes > 0` the model with the best
/// meta-val accuracy over all epochs is returned (earliest on ties);
/// otherwise the final one.
pub fn meta_train<R: Rng + ?Sized>(
    model: &PalModel,
    ds: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(PalModel, Vec<EpochLog>)> {
    if ds.split() != Split::MetaTrain {
        return Err(Error::Precondition(format!(
            "meta-training needs the meta-train split, got {}",
            ds.split().name()
        )));
    }
    if ds.d_raw() != model.head.input_dim() {
        return Err(Error::shape("meta_train", (ds.d_raw(), 0), (model.head.input_dim(), 0)));
    }
    let mc = &cfg.meta;
    if model.stage == Stage::Initialized && !mc.from_scratch {
        return Err(Error::Precondition(
            "model is not pretrained; enable from_scratch to meta-train it anyway".into(),
        ));
    }
    let shape = cfg.episode;
    if mc.epochs == 0 || mc.episodes_per_epoch == 0 {
        return Ok((model.clone(), Vec::new()));
    }

    let mut model = model.clone();
    match (mc.hal, model.hal.is_some()) {
        (true, false) => model.hal = Some(HalParams::init(model.dim(), rng)),
        (false, true) => model.hal = None,
        _ => {}
    }
    model.validate()?;
    let objective = cfg.objective();
    let mut opt = Sgd::new(mc.momentum, mc.weight_decay);
    let mut logs = Vec::with_capacity(mc.epochs);
    let mut best: Option<(f64, PalModel)> = None;
    let mut last_finite = f64::NAN;

    for epoch in 0..mc.epochs {
        let lr = mc.schedule.lr(epoch);
        let (mut meta_sum, mut pcc_sum, mut total_sum) = (0.0, 0.0, 0.0);
        for step in 0..mc.episodes_per_epoch {
            let episode = sample_episode(ds, shape.way, shape.shot, shape.query, rng)?;
            let input = EpisodeInput::sample(ds, &episode, cfg.model.segments, rng)?;
            let (loss, grads) = episode_loss(&model.head, model.hal.as_ref(), &input, &objective)?;
            if !loss.total.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_finite_loss: last_finite,
                });
            }
            last_finite = loss.total;
            meta_sum += loss.meta;
            pcc_sum += loss.pcc;
            total_sum += loss.total;
            opt.step(&mut model, &grads, lr, |id| {
                (id.is_head() || id.is_attention()) && !mc.frozen.contains(&id)
            })?;
            if model.overflowed() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_finite_loss: last_finite,
                });
            }
        }
        model.stage = Stage::MetaTrained;

        let val_acc = match val {
            Some(v) if mc.val_episodes > 0 => {
                let settings = EvalSettings::from_config(cfg, mc.val_episodes, mc.val_seed);
                Some(evaluate(&model, v, &settings)?.mean_accuracy)
            }
            _ => None,
        };
        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.clone()));
            }
        }
        let n = mc.episodes_per_epoch as f64;
        logs.push(EpochLog {
            epoch,
            lr,
            loss_meta: Some(meta_sum / n),
            loss_pcc: Some(pcc_sum / n),
            loss_total: total_sum / n,
            train_acc: None,
            val_acc,
        });
    }
    Ok((best.map_or(model, |(_, m)| m), logs))
}
