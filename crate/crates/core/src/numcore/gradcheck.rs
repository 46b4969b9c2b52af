use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Compare analytic gradients against central finite differences.
///
/// `f` returns the objective value and its analytic gradient with respect to
/// each matrix in `params` (same order, same shapes). Every entry of every
/// parameter is perturbed by `±FD_STEP`. The result is the maximum over all
/// entries of `|analytic - numeric| / max(1, |numeric|)`.
pub fn check_gradients<F>(params: &[Matrix], f: F) -> Result<f64>
where
    F: Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(Error::OracleFailure(format!("unperturbed point (value {value})")));
    }
    if analytic.len() != params.len() {
        return Err(Error::Precondition(format!(
            "expected {} gradient blocks, got {}",
            params.len(),
            analytic.len()
        )));
    }
    for (p, g) in params.iter().zip(&analytic) {
        if p.shape() != g.shape() {
            return Err(Error::shape("check_gradients", p.shape(), g.shape()));
        }
    }

    let mut work: Vec<Matrix> = params.to_vec();
    let mut max_err: f64 = 0.0;
    for (b, grad) in analytic.iter().enumerate() {
        for e in 0..params[b].as_slice().len() {
            let original = params[b].as_slice()[e];

            work[b].as_mut_slice()[e] = original + FD_STEP;
            let plus = f(&work)?.0;
            work[b].as_mut_slice()[e] = original - FD_STEP;
            let minus = f(&work)?.0;
            work[b].as_mut_slice()[e] = original;

            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::OracleFailure(format!("block {b} entry {e}")));
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = libm::fabs(grad.as_slice()[e] - numeric) / libm::fabs(numeric).max(1.0);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}
