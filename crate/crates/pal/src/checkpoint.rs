//! Model checkpoints.
//!
//! Layout, all little-endian: magic `FSCK`, version `u32`, stage tag `u8`,
//! config fingerprint `u64`, then named blocks until end of file. A block
//! is a name length `u32`, the UTF-8 name, rows `u32`, cols `u32` and
//! `rows * cols` `f64` values. Besides the parameter blocks two `1 x 1`
//! blocks record the head activation and the classifier scale.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pal_core::attention::HalParams;
use pal_core::embed::{Activation, CosineClassifier, EmbeddingHead, Linear};
use pal_core::trainer::{PalModel, Stage};
use pal_core::{Matrix, ParamId};

use crate::bytes::{to_u32, write_u32, write_u64, Reader};
use crate::error::{PalError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const ACTIVATION_BLOCK: &str = "meta.head_activation";
const SCALE_BLOCK: &str = "meta.classifier_scale";

/// A model together with the fingerprint of the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: PalModel,
    pub fingerprint: u64,
}

fn push_block(out: &mut Vec<u8>, name: &str, m: &Matrix) -> Result<()> {
    write_u32(out, to_u32(name.len(), "block name length")?);
    out.extend_from_slice(name.as_bytes());
    write_u32(out, to_u32(m.rows(), "rows")?);
    write_u32(out, to_u32(m.cols(), "cols")?);
    for &v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let m = &ck.model;
    m.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    write_u32(&mut out, CHECKPOINT_VERSION);
    out.push(m.stage.tag());
    write_u64(&mut out, ck.fingerprint);
    let activation = match m.head.activation {
        Activation::Identity => 0.0,
        Activation::Rectifier => 1.0,
    };
    push_block(&mut out, ACTIVATION_BLOCK, &Matrix::filled(1, 1, activation))?;
    if let Some(c) = &m.classifier {
        push_block(&mut out, SCALE_BLOCK, &Matrix::filled(1, 1, c.scale))?;
    }
    for (id, p) in m.params() {
        push_block(&mut out, id.name(), p)?;
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, path);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(r.error_at(0, "not a checkpoint (bad magic)"));
    }
    let at = r.offset();
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(r.error_at(
            at,
            format!("checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"),
        ));
    }
    let at = r.offset();
    let tag = r.u8("stage tag")?;
    let stage = Stage::from_tag(tag).ok_or_else(|| r.error_at(at, format!("unknown stage tag {tag}")))?;
    let fingerprint = r.u64("fingerprint")?;

    let mut blocks: BTreeMap<String, Matrix> = BTreeMap::new();
    while !r.at_end() {
        let at = r.offset();
        let len = r.u32("block name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "block name")?)
            .map_err(|_| r.error_at(at, "block name is not UTF-8"))?
            .to_string();
        if name != ACTIVATION_BLOCK && name != SCALE_BLOCK && ParamId::from_name(&name).is_none() {
            return Err(r.error_at(at, format!("unknown block {name:?}")));
        }
        if blocks.contains_key(&name) {
            return Err(r.error_at(at, format!("duplicate block {name:?}")));
        }
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some_and(|b| b as u64 <= bytes.len() as u64 - r.offset()))
            .ok_or_else(|| r.error(format!("block {name:?} of {rows}x{cols} exceeds the file")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64("block values")?);
        }
        blocks.insert(name, Matrix::new(rows, cols, data)?);
    }
    let end = r.offset();
    let bad = |message: String| PalError::Format {
        path: path.to_path_buf(),
        offset: end,
        message,
    };

    let mut take = |id: ParamId| blocks.remove(id.name());
    let scalar = |m: Option<Matrix>, what: &str| -> Result<Option<f64>> {
        match m {
            None => Ok(None),
            Some(m) if m.shape() == (1, 1) => Ok(Some(m.get(0, 0))),
            Some(m) => Err(bad(format!("{what} block is {}x{}, expected 1x1", m.rows(), m.cols()))),
        }
    };

    let out_weight = take(ParamId::HeadWeight).ok_or_else(|| bad("missing head.out.weight".into()))?;
    let hidden = match (take(ParamId::HeadHiddenWeight), take(ParamId::HeadHiddenBias)) {
        (Some(weight), bias) => Some(Linear { weight, bias }),
        (None, None) => None,
        (None, Some(_)) => return Err(bad("hidden bias without hidden weight".into())),
    };
    let output = Linear {
        weight: out_weight,
        bias: take(ParamId::HeadBias),
    };
    let classifier = take(ParamId::ClassifierWeight);
    let hal = match (take(ParamId::AttnQuery), take(ParamId::AttnKey), take(ParamId::AttnValue)) {
        (Some(q), Some(k), Some(v)) => Some(HalParams::new(q, k, v)?),
        (None, None, None) => None,
        _ => return Err(bad("incomplete attention blocks".into())),
    };
    let activation = match scalar(blocks.remove(ACTIVATION_BLOCK), "activation")? {
        None | Some(0.0) => Activation::Identity,
        Some(1.0) => Activation::Rectifier,
        Some(v) => return Err(bad(format!("unknown activation code {v}"))),
    };
    let scale = scalar(blocks.remove(SCALE_BLOCK), "classifier scale")?;
    let classifier = match (classifier, scale) {
        (Some(weight), Some(scale)) => Some(CosineClassifier { weight, scale }),
        (None, None) => None,
        _ => return Err(bad("classifier weight and scale must come together".into())),
    };

    let head = EmbeddingHead {
        hidden,
        output,
        activation,
    };
    check_head(&head).map_err(bad)?;
    let model = PalModel {
        head,
        classifier,
        hal,
        stage,
    };
    model.validate().map_err(|e| bad(e.to_string()))?;
    Ok(Checkpoint { model, fingerprint })
}

fn check_head(h: &EmbeddingHead) -> std::result::Result<(), String> {
    let bias_ok = |l: &Linear| l.bias.as_ref().is_none_or(|b| b.shape() == (1, l.weight.cols()));
    if let Some(hid) = &h.hidden {
        if hid.weight.cols() != h.output.weight.rows() || !bias_ok(hid) {
            return Err("hidden layer does not match the output layer".into());
        }
    }
    if !bias_ok(&h.output) || h.output.weight.is_empty() {
        return Err("malformed output layer".into());
    }
    Ok(())
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(ck)?;
    fs::write(path, bytes).map_err(|e| PalError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| PalError::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
