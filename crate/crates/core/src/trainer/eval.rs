use alloc::vec::Vec;

use super::{EpisodeShape, PalModel, TrainConfig};
use crate::data::{sample_episode, Dataset};
use crate::numcore::{cosine_rows, mean_rows};
use crate::objective::{prototype_centered_loss, query_centered_loss, ObjectiveConfig};
use crate::pipeline::{episode_forward, EpisodeInput};
use crate::{Matrix, Result};

/// Normal-approximation 95% quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub shape: EpisodeShape,
    pub episodes: usize,
    pub segments: usize,
    /// Episode `i` draws from stream `i` of this seed.
    pub seed: u64,
    pub objective: ObjectiveConfig,
}

impl EvalSettings {
    pub fn from_config(cfg: &TrainConfig, episodes: usize, seed: u64) -> Self {
        EvalSettings {
            shape: cfg.episode,
            episodes,
            segments: cfg.model.segments,
            seed,
            objective: cfg.objective(),
        }
    }
}

/// Measurements taken on a single evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub accuracy: f64,
    pub loss_meta: f64,
    pub loss_pcc: f64,
    /// Mean `1 - cos(x, class mean)` of support features before attention.
    pub spread_before: f64,
    pub spread_after: f64,
    /// Mean pairwise cosine between class prototypes before attention.
    pub inter_before: f64,
    pub inter_after: f64,
}

/// Feature-space separation averaged over episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Separation {
    pub intra_spread_before: f64,
    pub intra_spread_after: f64,
    pub inter_proto_cos_before: f64,
    pub inter_proto_cos_after: f64,
    /// Fraction of episodes whose intra-class spread shrank through attention;
    /// always 0 for one-shot episodes.
    pub tighter_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_accuracy: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub ci95: f64,
    pub loss_meta: f64,
    pub loss_pcc: f64,
    pub loss_total: f64,
    pub separation: Separation,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome], lambda: f64) -> Self {
        let n = outcomes.len();
        let mean = |f: fn(&EpisodeOutcome) -> f64| -> f64 {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let acc = mean(|o| o.accuracy);
        let ci95 = if n > 1 {
            let var = outcomes.iter().map(|o| (o.accuracy - acc) * (o.accuracy - acc)).sum::<f64>()
                / (n - 1) as f64;
            Z95 * libm::sqrt(var / n as f64)
        } else {
            0.0
        };
        let loss_meta = mean(|o| o.loss_meta);
        let loss_pcc = mean(|o| o.loss_pcc);
        EvalReport {
            episodes: n,
            mean_accuracy: acc,
            ci95,
            loss_meta,
            loss_pcc,
            loss_total: loss_meta + lambda * loss_pcc,
            separation: Separation {
                intra_spread_before: mean(|o| o.spread_before),
                intra_spread_after: mean(|o| o.spread_after),
                inter_proto_cos_before: mean(|o| o.inter_before),
                inter_proto_cos_after: mean(|o| o.inter_after),
                tighter_fraction: mean(|o| f64::from(u8::from(o.spread_after < o.spread_before))),
            },
        }
    }
}

fn intra_spread(x: &Matrix, groups: &[Vec<usize>], centers: &Matrix) -> Result<f64> {
    let cos = cosine_rows(x, centers)?;
    let mut total = 0.0;
    // a single support sample is its own mean: zero spread, not rounding noise
    for (c, g) in groups.iter().enumerate().filter(|(_, g)| g.len() > 1) {
        total += g.iter().map(|&i| 1.0 - cos.get(i, c)).sum::<f64>() / g.len() as f64;
    }
    Ok(total / groups.len() as f64)
}

fn inter_cosine(protos: &Matrix) -> Result<f64> {
    let cos = cosine_rows(protos, protos)?;
    let n = protos.rows();
    let (mut total, mut pairs) = (0.0, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            total += cos.get(i, j);
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}

/// Evaluate episode number `index`; depends only on the model, the dataset,
/// the settings and `index`.
pub fn evaluate_episode(
    model: &PalModel,
    ds: &Dataset,
    settings: &EvalSettings,
    index: u64,
) -> Result<EpisodeOutcome> {
    let mut rng = crate::rng_stream(settings.seed, index);
    let s = settings.shape;
    let episode = sample_episode(ds, s.way, s.shot, s.query, &mut rng)?;
    let input = EpisodeInput::sample(ds, &episode, settings.segments, &mut rng)?;
    let fwd = episode_forward(&model.head, model.hal.as_ref(), &input)?;
    let ef = &fwd.features;

    let cos = cosine_rows(&ef.xq_ctx, &fwd.prototypes.w)?;
    let correct = ef
        .query_labels
        .iter()
        .enumerate()
        .filter(|&(j, &y)| cos.row_argmax(j) == y)
        .count();
    let (loss_meta, _) = query_centered_loss(ef, &fwd.prototypes, settings.objective.scale)?;
    let loss_pcc = prototype_centered_loss(
        ef,
        &fwd.prototypes,
        settings.objective.pcc_mode,
        settings.objective.scale,
    )?;

    let groups = ef.support_groups();
    let protos_before = mean_rows(&fwd.xs, &groups)?;
    Ok(EpisodeOutcome {
        accuracy: correct as f64 / ef.query_labels.len() as f64,
        loss_meta,
        loss_pcc,
        spread_before: intra_spread(&fwd.xs, &groups, &protos_before)?,
        spread_after: intra_spread(&ef.xs_ctx, &groups, &fwd.prototypes.w)?,
        inter_before: inter_cosine(&protos_before)?,
        inter_after: inter_cosine(&fwd.prototypes.w)?,
    })
}

/// Sequential evaluation over `settings.episodes` episodes. The model is
/// only read.
pub fn evaluate(model: &PalModel, ds: &Dataset, settings: &EvalSettings) -> Result<EvalReport> {
    let outcomes = (0..settings.episodes as u64)
        .map(|i| evaluate_episode(model, ds, settings, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_outcomes(&outcomes, settings.objective.lambda))
}
