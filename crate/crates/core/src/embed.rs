//! Stage-1 model: a trainable per-frame embedding head over raw frame
//! features and a cosine classifier over every meta-training class.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::numcore::{cosine_rows, cosine_rows_backward, mean_rows, mean_rows_backward, ops};
use crate::{Error, Gradients, Matrix, ParamId, Result};

/// Fully connected layer `x W + b` with `W: in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Option<Matrix>,
}

impl Linear {
    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let y = x.matmul(&self.weight)?;
        match &self.bias {
            Some(b) => y.add_row_broadcast(b),
            None => Ok(y),
        }
    }
}

/// Nonlinearity applied to the head output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Identity,
    Rectifier,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Rectifier => "rectifier",
        }
    }
}

/// Shape of the embedding head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HeadConfig {
    /// Width of an optional rectified hidden layer.
    pub hidden: Option<usize>,
    pub bias: bool,
    pub activation: Activation,
}

/// Per-frame embedding `h(.)`: one linear map, or linear-rectifier-linear
/// when a hidden layer is configured, followed by the output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingHead {
    pub hidden: Option<Linear>,
    pub output: Linear,
    pub activation: Activation,
}

/// Intermediate values kept by [`EmbeddingHead::forward_traced`].
#[derive(Debug, Clone)]
pub struct HeadTrace {
    input: Matrix,
    hidden_pre: Option<Matrix>,
    hidden_act: Option<Matrix>,
    output_pre: Matrix,
}

impl EmbeddingHead {
    /// Gaussian initialisation with standard deviation `1/sqrt(fan_in)`.
    pub fn init<R: Rng + ?Sized>(d_raw: usize, d: usize, cfg: HeadConfig, rng: &mut R) -> Self {
        let layer = |fan_in: usize, fan_out: usize, rng: &mut R| Linear {
            weight: Matrix::random_normal(fan_in, fan_out, 1.0 / libm::sqrt(fan_in as f64), rng),
            bias: cfg.bias.then(|| Matrix::zeros(1, fan_out)),
        };
        match cfg.hidden {
            Some(h) => {
                let hidden = layer(d_raw, h, rng);
                let output = layer(h, d, rng);
                EmbeddingHead {
                    hidden: Some(hidden),
                    output,
                    activation: cfg.activation,
                }
            }
            None => EmbeddingHead {
                hidden: None,
                output: layer(d_raw, d, rng),
                activation: cfg.activation,
            },
        }
    }

    /// Linear head with the identity as weight.
    pub fn identity(d: usize) -> Self {
        EmbeddingHead {
            hidden: None,
            output: Linear {
                weight: Matrix::identity(d),
                bias: None,
            },
            activation: Activation::Identity,
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.hidden {
            Some(h) => h.weight.rows(),
            None => self.output.weight.rows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_traced(x)?.0)
    }

    pub fn forward_traced(&self, x: &Matrix) -> Result<(Matrix, HeadTrace)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("embedding head", x.shape(), (self.input_dim(), self.output_dim())));
        }
        let (hidden_pre, hidden_act, output_pre) = match &self.hidden {
            Some(h) => {
                let pre = h.forward(x)?;
                let act = relu(&pre);
                let out = self.output.forward(&act)?;
                (Some(pre), Some(act), out)
            }
            None => (None, None, self.output.forward(x)?),
        };
        let out = match self.activation {
            Activation::Identity => output_pre.clone(),
            Activation::Rectifier => relu(&output_pre),
        };
        Ok((
            out,
            HeadTrace {
                input: x.clone(),
                hidden_pre,
                hidden_act,
                output_pre,
            },
        ))
    }

    /// Parameter gradients given the upstream gradient of the head output.
    pub fn backward(&self, trace: &HeadTrace, dout: &Matrix) -> Result<Gradients> {
        let mut grads = Gradients::new();
        let gated;
        let dout = match self.activation {
            Activation::Identity => dout,
            Activation::Rectifier => {
                gated = relu_backward(&trace.output_pre, dout);
                &gated
            }
        };
        let out_input = trace.hidden_act.as_ref().unwrap_or(&trace.input);
        grads.accumulate(ParamId::HeadWeight, out_input.matmul_tn(dout)?)?;
        if self.output.bias.is_some() {
            grads.accumulate(ParamId::HeadBias, dout.column_sums())?;
        }
        if let (Some(hidden), Some(pre)) = (&self.hidden, &trace.hidden_pre) {
            let dpre = relu_backward(pre, &dout.matmul_nt(&self.output.weight)?);
            grads.accumulate(ParamId::HeadHiddenWeight, trace.input.matmul_tn(&dpre)?)?;
            if hidden.bias.is_some() {
                grads.accumulate(ParamId::HeadHiddenBias, dpre.column_sums())?;
            }
        }
        Ok(grads)
    }

    pub fn params(&self) -> Vec<(ParamId, &Matrix)> {
        let mut out = Vec::new();
        if let Some(h) = &self.hidden {
            out.push((ParamId::HeadHiddenWeight, &h.weight));
            if let Some(b) = &h.bias {
                out.push((ParamId::HeadHiddenBias, b));
            }
        }
        out.push((ParamId::HeadWeight, &self.output.weight));
        if let Some(b) = &self.output.bias {
            out.push((ParamId::HeadBias, b));
        }
        out
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Matrix> {
        match id {
            ParamId::HeadHiddenWeight => self.hidden.as_mut().map(|h| &mut h.weight),
            ParamId::HeadHiddenBias => self.hidden.as_mut().and_then(|h| h.bias.as_mut()),
            ParamId::HeadWeight => Some(&mut self.output.weight),
            ParamId::HeadBias => self.output.bias.as_mut(),
            _ => None,
        }
    }
}

fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

fn relu_backward(pre: &Matrix, dout: &Matrix) -> Matrix {
    let mut d = dout.clone();
    for (g, &p) in d.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    d
}

/// Cosine classifier with one weight row per meta-training class.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineClassifier {
    /// `Z x d`.
    pub weight: Matrix,
    /// Multiplier applied to cosine scores before the softmax.
    pub scale: f64,
}

impl CosineClassifier {
    pub fn init<R: Rng + ?Sized>(classes: usize, d: usize, scale: f64, rng: &mut R) -> Self {
        CosineClassifier {
            weight: Matrix::random_normal(classes, d, 1.0 / libm::sqrt(d as f64), rng),
            scale,
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }
}

/// Frame features `T x d` and their column mean `1 x d`.
pub fn embed_video(head: &EmbeddingHead, frames: &Matrix) -> Result<(Matrix, Matrix)> {
    if frames.rows() == 0 {
        return Err(Error::Precondition("embed_video needs at least one frame".into()));
    }
    let feats = head.forward(frames)?;
    let all: Vec<usize> = (0..feats.rows()).collect();
    let video = mean_rows(&feats, &[all])?;
    Ok((feats, video))
}

/// Class probabilities and video-level scores for one sampled video.
///
/// Each frame is scored against every class by scaled cosine similarity and
/// the frame scores are averaged; the softmax is taken over the averaged
/// scores.
pub fn pretrain_scores(
    head: &EmbeddingHead,
    clf: &CosineClassifier,
    frames: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let (feats, _) = embed_video(head, frames)?;
    let frame_scores = cosine_rows(&feats, &clf.weight)?.scale(clf.scale);
    let all: Vec<usize> = (0..feats.rows()).collect();
    let video_scores = mean_rows(&frame_scores, &[all])?;
    let probs = ops::row_softmax(&video_scores)?;
    Ok((probs, video_scores))
}

/// Loss, gradients and correct-prediction count of a stage-1 batch.
#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub loss: f64,
    pub grads: Gradients,
    pub correct: usize,
}

/// Mean cross-entropy of `batch` under the stage-1 model with gradients for
/// the head and the classifier weights.
pub fn pretrain_loss(
    head: &EmbeddingHead,
    clf: &CosineClassifier,
    batch: &[(Matrix, usize)],
) -> Result<(f64, Gradients)> {
    let out = pretrain_forward_backward(head, clf, batch)?;
    Ok((out.loss, out.grads))
}

pub fn pretrain_forward_backward(
    head: &EmbeddingHead,
    clf: &CosineClassifier,
    batch: &[(Matrix, usize)],
) -> Result<PretrainOutput> {
    if batch.is_empty() {
        return Err(Error::Precondition("empty pretraining batch".into()));
    }
    let z = clf.classes();
    let mut groups = Vec::with_capacity(batch.len());
    let mut start = 0;
    for (frames, label) in batch {
        if *label >= z {
            return Err(Error::Precondition(format!("label {label} out of range for {z} classes")));
        }
        if frames.rows() == 0 {
            return Err(Error::Precondition("video without frames in batch".into()));
        }
        groups.push((start..start + frames.rows()).collect::<Vec<_>>());
        start += frames.rows();
    }
    let stacked = Matrix::vstack(&batch.iter().map(|(f, _)| f).collect::<Vec<_>>())?;

    let (feats, trace) = head.forward_traced(&stacked)?;
    let cos = cosine_rows(&feats, &clf.weight)?;
    let scores = mean_rows(&cos, &groups)?.scale(clf.scale);

    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0;
    let mut dscores = Matrix::zeros(batch.len(), z);
    for (i, (_, label)) in batch.iter().enumerate() {
        let row = scores.row(i);
        loss += ops::log_sum_exp(row.iter().copied()) - row[*label];
        if scores.row_argmax(i) == *label {
            correct += 1;
        }
        let mut p = row.to_vec();
        ops::softmax_in_place(&mut p);
        p[*label] -= 1.0;
        for (d, v) in dscores.row_mut(i).iter_mut().zip(p) {
            *d = v * inv_b * clf.scale;
        }
    }
    loss *= inv_b;

    let dcos = mean_rows_backward(cos.rows(), &groups, &dscores)?;
    let (dfeats, dw) = cosine_rows_backward(&feats, &clf.weight, &dcos)?;
    let mut grads = head.backward(&trace, &dfeats)?;
    grads.accumulate(ParamId::ClassifierWeight, dw)?;
    Ok(PretrainOutput {
        loss,
        grads,
        correct,
    })
}
