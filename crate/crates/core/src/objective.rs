//! Episode objectives over attentive support and query features: prototypes,
//! the query-centred cross-entropy, the prototype-centred contrastive loss
//! and their weighted sum.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numcore::ops::log_sum_exp;
use crate::numcore::{cosine_rows, cosine_rows_backward, mean_rows, mean_rows_backward, ops};
use crate::{Error, Matrix, Result};

/// Clamp applied to the positive and total cosine sums in literal mode.
pub const LITERAL_CLAMP: f64 = 1e-6;

/// How the prototype-centred loss turns cosines into positive weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PccMode {
    /// Raw cosine sums, each clamped below at [`LITERAL_CLAMP`].
    Literal,
    /// `exp(scale * cos)` weights, a softmax over the query set per prototype.
    #[default]
    Exp,
}

impl PccMode {
    pub fn name(self) -> &'static str {
        match self {
            PccMode::Literal => "literal",
            PccMode::Exp => "exp",
        }
    }
}

/// Attentive features of one episode with episode-local labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFeatures {
    pub xs_ctx: Matrix,
    pub xq_ctx: Matrix,
    pub support_labels: Vec<usize>,
    pub query_labels: Vec<usize>,
    pub way: usize,
}

impl EpisodeFeatures {
    pub fn new(
        xs_ctx: Matrix,
        xq_ctx: Matrix,
        support_labels: Vec<usize>,
        query_labels: Vec<usize>,
        way: usize,
    ) -> Result<Self> {
        if xs_ctx.rows() != support_labels.len() || xq_ctx.rows() != query_labels.len() {
            return Err(Error::Precondition(format!(
                "{} support rows with {} labels, {} query rows with {} labels",
                xs_ctx.rows(),
                support_labels.len(),
                xq_ctx.rows(),
                query_labels.len()
            )));
        }
        if xs_ctx.cols() != xq_ctx.cols() {
            return Err(Error::shape("EpisodeFeatures", xs_ctx.shape(), xq_ctx.shape()));
        }
        if let Some(&l) = support_labels.iter().chain(&query_labels).find(|&&l| l >= way) {
            return Err(Error::Precondition(format!("label {l} out of range for {way}-way episode")));
        }
        Ok(EpisodeFeatures {
            xs_ctx,
            xq_ctx,
            support_labels,
            query_labels,
            way,
        })
    }

    pub fn support_groups(&self) -> Vec<Vec<usize>> {
        group_by_label(&self.support_labels, self.way)
    }

    pub fn query_groups(&self) -> Vec<Vec<usize>> {
        group_by_label(&self.query_labels, self.way)
    }
}

fn group_by_label(labels: &[usize], way: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); way];
    for (i, &l) in labels.iter().enumerate() {
        out[l].push(i);
    }
    out
}

/// `way x d` class prototypes; row `c` is the mean of class-`c` support rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub w: Matrix,
}

pub fn compute_prototypes(ef: &EpisodeFeatures) -> Result<Prototypes> {
    let groups = ef.support_groups();
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(Error::Precondition(format!("class {c} has no support rows")));
    }
    let k = groups[0].len();
    if let Some(c) = groups.iter().position(|g| g.len() != k) {
        return Err(Error::Precondition(format!(
            "class {c} has {} support rows, class 0 has {k}",
            groups[c].len()
        )));
    }
    Ok(Prototypes {
        w: mean_rows(&ef.xs_ctx, &groups)?,
    })
}

fn check_protos(ef: &EpisodeFeatures, protos: &Prototypes) -> Result<()> {
    if protos.w.rows() != ef.way || protos.w.cols() != ef.xq_ctx.cols() {
        return Err(Error::shape("prototypes", (ef.way, ef.xq_ctx.cols()), protos.w.shape()));
    }
    Ok(())
}

/// Mean over queries of `-log p̃[y]`, `p̃ = softmax(scale * cos(query, prototypes))`.
/// Returns the loss and the `NQ x N` probability matrix.
pub fn query_centered_loss(ef: &EpisodeFeatures, protos: &Prototypes, scale: f64) -> Result<(f64, Matrix)> {
    check_protos(ef, protos)?;
    if ef.query_labels.is_empty() {
        return Err(Error::Precondition("query-centred loss needs at least one query".into()));
    }
    let cos = cosine_rows(&ef.xq_ctx, &protos.w)?;
    Ok(meta_from_cosines(&cos, &ef.query_labels, scale))
}

fn meta_from_cosines(cos: &Matrix, labels: &[usize], scale: f64) -> (f64, Matrix) {
    let logits = cos.scale(scale);
    let mut loss = 0.0;
    for (j, &y) in labels.iter().enumerate() {
        let row = logits.row(j);
        loss += log_sum_exp(row.iter().copied()) - row[y];
    }
    let probs = ops::row_softmax(&logits).expect("non-empty logits");
    (loss / labels.len() as f64, probs)
}

fn query_groups_checked(ef: &EpisodeFeatures) -> Result<Vec<Vec<usize>>> {
    let groups = ef.query_groups();
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(Error::Precondition(format!("class {c} has no query samples")));
    }
    Ok(groups)
}

/// Prototype-anchored contrastive loss: for each prototype, the negative log
/// share of its own-class queries in the similarity mass over all queries,
/// averaged over prototypes.
pub fn prototype_centered_loss(
    ef: &EpisodeFeatures,
    protos: &Prototypes,
    mode: PccMode,
    scale: f64,
) -> Result<f64> {
    check_protos(ef, protos)?;
    let groups = query_groups_checked(ef)?;
    let cos = cosine_rows(&ef.xq_ctx, &protos.w)?;
    Ok(pcc_from_cosines(&cos, &groups, mode, scale).0)
}

/// Loss value and `dL/dcos` for the prototype-centred term.
fn pcc_from_cosines(cos: &Matrix, groups: &[Vec<usize>], mode: PccMode, scale: f64) -> (f64, Matrix) {
    let way = groups.len();
    let nq = cos.rows();
    let inv_n = 1.0 / way as f64;
    let mut loss = 0.0;
    let mut dcos = Matrix::zeros(nq, way);
    for (c, positives) in groups.iter().enumerate() {
        let column = (0..nq).map(|j| cos.get(j, c));
        match mode {
            PccMode::Exp => {
                let all = log_sum_exp(column.clone().map(|v| scale * v));
                let pos = log_sum_exp(positives.iter().map(|&i| scale * cos.get(i, c)));
                loss += all - pos;
                for j in 0..nq {
                    let share_all = libm::exp(scale * cos.get(j, c) - all);
                    dcos.set(j, c, inv_n * scale * share_all);
                }
                for &i in positives {
                    let share_pos = libm::exp(scale * cos.get(i, c) - pos);
                    let g = dcos.get(i, c) - inv_n * scale * share_pos;
                    dcos.set(i, c, g);
                }
            }
            PccMode::Literal => {
                let num: f64 = positives.iter().map(|&i| cos.get(i, c)).sum();
                let den: f64 = column.sum();
                loss += libm::log(den.max(LITERAL_CLAMP)) - libm::log(num.max(LITERAL_CLAMP));
                if den > LITERAL_CLAMP {
                    for j in 0..nq {
                        dcos.set(j, c, inv_n / den);
                    }
                }
                if num > LITERAL_CLAMP {
                    for &i in positives {
                        dcos.set(i, c, dcos.get(i, c) - inv_n / num);
                    }
                }
            }
        }
    }
    (loss * inv_n, dcos)
}

/// Knobs shared by both objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectiveConfig {
    /// Multiplier on cosines inside both softmax-like terms.
    pub scale: f64,
    /// Weight of the prototype-centred term.
    pub lambda: f64,
    pub pcc_mode: PccMode,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            scale: 1.0,
            lambda: 1.0,
            pcc_mode: PccMode::Exp,
        }
    }
}

/// Combined loss value with gradients with respect to the attentive
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub meta: f64,
    pub pcc: f64,
    pub total: f64,
    /// `NQ x N` query-centred class probabilities.
    pub probs: Matrix,
    pub d_support_ctx: Matrix,
    pub d_query_ctx: Matrix,
}

/// `L_meta + lambda * L_pcc` and its reverse pass down to `xs_ctx`/`xq_ctx`.
pub fn combined_loss(ef: &EpisodeFeatures, protos: &Prototypes, cfg: &ObjectiveConfig) -> Result<CombinedLoss> {
    if !(cfg.lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {}", cfg.lambda)));
    }
    check_protos(ef, protos)?;
    let qgroups = query_groups_checked(ef)?;
    let cos = cosine_rows(&ef.xq_ctx, &protos.w)?;

    let (meta, probs) = meta_from_cosines(&cos, &ef.query_labels, cfg.scale);
    let (pcc, dcos_pcc) = pcc_from_cosines(&cos, &qgroups, cfg.pcc_mode, cfg.scale);

    let nq = ef.query_labels.len() as f64;
    let mut dcos = Matrix::zeros(cos.rows(), cos.cols());
    for (j, &y) in ef.query_labels.iter().enumerate() {
        for c in 0..ef.way {
            let target = if c == y { 1.0 } else { 0.0 };
            dcos.set(j, c, cfg.scale * (probs.get(j, c) - target) / nq);
        }
    }
    dcos.scaled_add(cfg.lambda, &dcos_pcc)?;

    let (d_query_ctx, d_protos) = cosine_rows_backward(&ef.xq_ctx, &protos.w, &dcos)?;
    let d_support_ctx = mean_rows_backward(ef.xs_ctx.rows(), &ef.support_groups(), &d_protos)?;
    Ok(CombinedLoss {
        meta,
        pcc,
        total: meta + cfg.lambda * pcc,
        probs,
        d_support_ctx,
        d_query_ctx,
    })
}
