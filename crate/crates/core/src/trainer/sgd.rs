use alloc::collections::BTreeMap;

use super::PalModel;
use crate::{Error, Gradients, Matrix, ParamId, Result};

/// Plain SGD with optional momentum and L2 weight decay.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: BTreeMap<ParamId, Matrix>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            velocity: BTreeMap::new(),
        }
    }

    /// Apply `grads` to every parameter accepted by `allow`.
    pub fn step(
        &mut self,
        model: &mut PalModel,
        grads: &Gradients,
        lr: f64,
        allow: impl Fn(ParamId) -> bool,
    ) -> Result<()> {
        for (id, g) in grads.iter() {
            if !allow(id) {
                continue;
            }
            let p = model
                .param_mut(id)
                .ok_or_else(|| Error::Precondition(alloc::format!("model has no parameter {}", id.name())))?;
            if p.shape() != g.shape() {
                return Err(Error::shape(id.name(), p.shape(), g.shape()));
            }
            if lr == 0.0 {
                continue;
            }
            let mut update = g.clone();
            if self.weight_decay != 0.0 {
                update.scaled_add(self.weight_decay, p)?;
            }
            if self.momentum != 0.0 {
                let v = self
                    .velocity
                    .entry(id)
                    .or_insert_with(|| Matrix::zeros(g.rows(), g.cols()));
                for (vi, &u) in v.as_mut_slice().iter_mut().zip(update.as_slice()) {
                    *vi = self.momentum * *vi + u;
                }
                update = v.clone();
            }
            p.scaled_add(-lr, &update)?;
        }
        Ok(())
    }
}
