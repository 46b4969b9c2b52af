use alloc::collections::BTreeMap;

use super::Matrix;
use crate::{Error, Result};

/// Identifier of a learnable parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ParamId {
    #[cfg_attr(feature = "serde", serde(rename = "head.hidden.weight"))]
    HeadHiddenWeight,
    #[cfg_attr(feature = "serde", serde(rename = "head.hidden.bias"))]
    HeadHiddenBias,
    #[cfg_attr(feature = "serde", serde(rename = "head.out.weight"))]
    HeadWeight,
    #[cfg_attr(feature = "serde", serde(rename = "head.out.bias"))]
    HeadBias,
    #[cfg_attr(feature = "serde", serde(rename = "classifier.weight"))]
    ClassifierWeight,
    #[cfg_attr(feature = "serde", serde(rename = "hal.w_q"))]
    AttnQuery,
    #[cfg_attr(feature = "serde", serde(rename = "hal.w_k"))]
    AttnKey,
    #[cfg_attr(feature = "serde", serde(rename = "hal.w_v"))]
    AttnValue,
}

impl ParamId {
    pub const ALL: [ParamId; 8] = [
        ParamId::HeadHiddenWeight,
        ParamId::HeadHiddenBias,
        ParamId::HeadWeight,
        ParamId::HeadBias,
        ParamId::ClassifierWeight,
        ParamId::AttnQuery,
        ParamId::AttnKey,
        ParamId::AttnValue,
    ];

    /// Stable name used in checkpoints.
    pub fn name(self) -> &'static str {
        match self {
            ParamId::HeadHiddenWeight => "head.hidden.weight",
            ParamId::HeadHiddenBias => "head.hidden.bias",
            ParamId::HeadWeight => "head.out.weight",
            ParamId::HeadBias => "head.out.bias",
            ParamId::ClassifierWeight => "classifier.weight",
            ParamId::AttnQuery => "hal.w_q",
            ParamId::AttnKey => "hal.w_k",
            ParamId::AttnValue => "hal.w_v",
        }
    }

    pub fn from_name(name: &str) -> Option<ParamId> {
        ParamId::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_head(self) -> bool {
        matches!(
            self,
            ParamId::HeadHiddenWeight | ParamId::HeadHiddenBias | ParamId::HeadWeight | ParamId::HeadBias
        )
    }

    pub fn is_attention(self) -> bool {
        matches!(self, ParamId::AttnQuery | ParamId::AttnKey | ParamId::AttnValue)
    }
}

/// Gradient of a scalar objective with respect to each registered parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    entries: BTreeMap<ParamId, Matrix>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `grad` into the entry for `id`, creating it if absent.
    pub fn accumulate(&mut self, id: ParamId, grad: Matrix) -> Result<()> {
        match self.entries.get_mut(&id) {
            Some(existing) => existing.add_assign(&grad),
            None => {
                self.entries.insert(id, grad);
                Ok(())
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.entries.get(&id)
    }

    pub fn remove(&mut self, id: ParamId) -> Option<Matrix> {
        self.entries.remove(&id)
    }

    pub fn contains(&self, id: ParamId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Merge every entry of `other` into `self`.
    pub fn merge(&mut self, other: Gradients) -> Result<()> {
        for (id, g) in other.entries {
            self.accumulate(id, g)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for g in self.entries.values_mut() {
            for v in g.as_mut_slice() {
                *v *= alpha;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Matrix::is_finite)
    }

    /// Check every entry against the shape of the parameter it belongs to.
    pub fn check_shapes<'a>(
        &self,
        params: impl IntoIterator<Item = (ParamId, &'a Matrix)>,
    ) -> Result<()> {
        let mut seen = 0;
        for (id, p) in params {
            if let Some(g) = self.entries.get(&id) {
                if g.shape() != p.shape() {
                    return Err(Error::shape(id.name(), p.shape(), g.shape()));
                }
                seen += 1;
            }
        }
        if seen != self.entries.len() {
            return Err(Error::Precondition(alloc::format!(
                "{} gradient entries have no matching parameter",
                self.entries.len() - seen
            )));
        }
        Ok(())
    }
}
