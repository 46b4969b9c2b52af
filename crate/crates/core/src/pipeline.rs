//! The stage-2 episode graph: frames → embedding head → video features →
//! hybrid attention → prototypes → objectives, forward and reverse.

use alloc::vec::Vec;

use rand::Rng;

use crate::attention::{cross_attend, hal_backward, self_attend, HalParams};
use crate::data::{sample_frames, Dataset, Episode};
use crate::embed::EmbeddingHead;
use crate::numcore::{mean_rows, mean_rows_backward};
use crate::objective::{combined_loss, compute_prototypes, EpisodeFeatures, ObjectiveConfig, Prototypes};
use crate::{Error, Gradients, Matrix, Result};

/// Sampled frames of every video in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeInput {
    pub support_frames: Vec<Matrix>,
    pub query_frames: Vec<Matrix>,
    pub support_labels: Vec<usize>,
    pub query_labels: Vec<usize>,
    pub way: usize,
}

impl EpisodeInput {
    /// Sparse-sample `segments` frames from every support then query video.
    pub fn sample<R: Rng + ?Sized>(
        ds: &Dataset,
        episode: &Episode,
        segments: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let frames = |items: &[crate::data::EpisodeItem], rng: &mut R| -> Result<Vec<Matrix>> {
            items
                .iter()
                .map(|it| sample_frames(&ds.samples()[it.sample], segments, rng))
                .collect()
        };
        let support_frames = frames(&episode.support, rng)?;
        let query_frames = frames(&episode.query, rng)?;
        Ok(EpisodeInput {
            support_frames,
            query_frames,
            support_labels: episode.support_labels(),
            query_labels: episode.query_labels(),
            way: episode.way,
        })
    }

    fn video_groups(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.support_frames
            .iter()
            .chain(&self.query_frames)
            .map(|f| {
                let g = (start..start + f.rows()).collect();
                start += f.rows();
                g
            })
            .collect()
    }

    fn stacked(&self) -> Result<Matrix> {
        let parts: Vec<&Matrix> = self.support_frames.iter().chain(&self.query_frames).collect();
        if parts.iter().any(|m| m.rows() == 0) {
            return Err(Error::Precondition("video without sampled frames".into()));
        }
        Matrix::vstack(&parts)
    }
}

/// Every intermediate of the forward pass that evaluation looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeForward {
    /// Pre-attention support features.
    pub xs: Matrix,
    /// Pre-attention query features.
    pub xq: Matrix,
    pub features: EpisodeFeatures,
    pub prototypes: Prototypes,
}

fn split_rows(m: &Matrix, at: usize) -> Result<(Matrix, Matrix)> {
    let head: Vec<usize> = (0..at).collect();
    let tail: Vec<usize> = (at..m.rows()).collect();
    Ok((m.select_rows(&head)?, m.select_rows(&tail)?))
}

/// Forward pass. `hal = None` bypasses attention (`X^ctx = X`).
pub fn episode_forward(
    head: &EmbeddingHead,
    hal: Option<&HalParams>,
    input: &EpisodeInput,
) -> Result<EpisodeForward> {
    let frames = head.forward(&input.stacked()?)?;
    let videos = mean_rows(&frames, &input.video_groups())?;
    forward_from_videos(hal, &videos, input)
}

fn forward_from_videos(
    hal: Option<&HalParams>,
    videos: &Matrix,
    input: &EpisodeInput,
) -> Result<EpisodeForward> {
    let (xs, xq) = split_rows(videos, input.support_frames.len())?;
    let (xs_ctx, xq_ctx) = match hal {
        Some(p) => (self_attend(p, &xs)?, cross_attend(p, &xq, &xs)?),
        None => (xs.clone(), xq.clone()),
    };
    let features = EpisodeFeatures::new(
        xs_ctx,
        xq_ctx,
        input.support_labels.clone(),
        input.query_labels.clone(),
        input.way,
    )?;
    let prototypes = compute_prototypes(&features)?;
    Ok(EpisodeForward {
        xs,
        xq,
        features,
        prototypes,
    })
}

/// Scalar pieces of the combined episode objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLoss {
    pub meta: f64,
    pub pcc: f64,
    pub total: f64,
}

/// Combined loss of one episode and its gradient with respect to the head
/// and, when enabled, the attention projections.
pub fn episode_loss(
    head: &EmbeddingHead,
    hal: Option<&HalParams>,
    input: &EpisodeInput,
    cfg: &ObjectiveConfig,
) -> Result<(EpisodeLoss, Gradients)> {
    let (frames, trace) = head.forward_traced(&input.stacked()?)?;
    let groups = input.video_groups();
    let videos = mean_rows(&frames, &groups)?;
    let fwd = forward_from_videos(hal, &videos, input)?;
    let loss = combined_loss(&fwd.features, &fwd.prototypes, cfg)?;

    let (d_xs, d_xq, mut grads) = match hal {
        Some(p) => {
            let back = hal_backward(p, &fwd.xs, &fwd.xq, &loss.d_support_ctx, &loss.d_query_ctx)?;
            (back.d_support, back.d_query, back.grads)
        }
        None => (loss.d_support_ctx, loss.d_query_ctx, Gradients::new()),
    };
    let d_videos = Matrix::vstack(&[&d_xs, &d_xq])?;
    let d_frames = mean_rows_backward(frames.rows(), &groups, &d_videos)?;
    grads.merge(head.backward(&trace, &d_frames)?)?;
    Ok((
        EpisodeLoss {
            meta: loss.meta,
            pcc: loss.pcc,
            total: loss.total,
        },
        grads,
    ))
}
