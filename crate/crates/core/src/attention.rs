//! Hybrid attentive learning: support-set self-attention and query-to-support
//! cross-attention sharing one set of projections, each with a residual.

use alloc::format;

use rand::Rng;

use crate::numcore::{matmul_backward, row_softmax, row_softmax_backward};
use crate::{Error, Gradients, Matrix, ParamId, Result};

/// Query, key and value projections, each `d x d_a` with `d == d_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl HalParams {
    pub fn new(w_q: Matrix, w_k: Matrix, w_v: Matrix) -> Result<Self> {
        let (d, da) = w_q.shape();
        if d != da {
            return Err(Error::Config(format!(
                "attention latent dimension {da} must equal feature dimension {d}"
            )));
        }
        for m in [&w_k, &w_v] {
            if m.shape() != (d, da) {
                return Err(Error::shape("HalParams::new", (d, da), m.shape()));
            }
        }
        Ok(HalParams { w_q, w_k, w_v })
    }

    /// `W_Q, W_K ~ N(0, 1/d)`, `W_V ~ N(0, (0.02)^2/d)` so the residual path
    /// starts close to the identity.
    pub fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let s = 1.0 / libm::sqrt(d as f64);
        HalParams {
            w_q: Matrix::random_normal(d, d, s, rng),
            w_k: Matrix::random_normal(d, d, s, rng),
            w_v: Matrix::random_normal(d, d, 0.02 * s, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.w_q.cols()
    }

    fn inv_sqrt_latent(&self) -> f64 {
        1.0 / libm::sqrt(self.latent_dim() as f64)
    }

    fn check_input(&self, x: &Matrix, op: &'static str) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::shape(op, x.shape(), self.w_q.shape()));
        }
        Ok(())
    }

    pub fn params(&self) -> [(ParamId, &Matrix); 3] {
        [
            (ParamId::AttnQuery, &self.w_q),
            (ParamId::AttnKey, &self.w_k),
            (ParamId::AttnValue, &self.w_v),
        ]
    }

    pub fn param_mut(&mut self, id: ParamId) -> Option<&mut Matrix> {
        match id {
            ParamId::AttnQuery => Some(&mut self.w_q),
            ParamId::AttnKey => Some(&mut self.w_k),
            ParamId::AttnValue => Some(&mut self.w_v),
            _ => None,
        }
    }
}

/// Row-stochastic attention weights of `queries` over `keys`:
/// `softmax(queries W_Q (keys W_K)ᵀ / sqrt(d_a))`.
pub fn attention_weights(p: &HalParams, queries: &Matrix, keys: &Matrix) -> Result<Matrix> {
    p.check_input(queries, "attention_weights")?;
    p.check_input(keys, "attention_weights")?;
    if keys.rows() == 0 {
        return Err(Error::Precondition("attention over an empty support set".into()));
    }
    if queries.rows() == 0 {
        return Ok(Matrix::zeros(0, keys.rows()));
    }
    let q = queries.matmul(&p.w_q)?;
    let k = keys.matmul(&p.w_k)?;
    row_softmax(&q.matmul_nt(&k)?.scale(p.inv_sqrt_latent()))
}

fn attend(p: &HalParams, x: &Matrix, source: &Matrix) -> Result<Matrix> {
    let a = attention_weights(p, x, source)?;
    let v = source.matmul(&p.w_v)?;
    x.add(&a.matmul(&v)?)
}

/// `X + softmax(X W_Q (X W_K)ᵀ / sqrt(d_a)) X W_V` over the support features.
pub fn self_attend(p: &HalParams, xs: &Matrix) -> Result<Matrix> {
    p.check_input(xs, "self_attend")?;
    attend(p, xs, xs)
}

/// Queries attend to the support set only; each query row is transformed
/// independently of the others.
pub fn cross_attend(p: &HalParams, xq: &Matrix, xs: &Matrix) -> Result<Matrix> {
    p.check_input(xq, "cross_attend")?;
    p.check_input(xs, "cross_attend")?;
    attend(p, xq, xs)
}

/// Gradients of both attention paths.
#[derive(Debug, Clone, PartialEq)]
pub struct HalBackward {
    /// `W_Q`, `W_K`, `W_V`, each summed over the self and cross paths.
    pub grads: Gradients,
    pub d_support: Matrix,
    pub d_query: Matrix,
}

/// Per-path gradient pieces: `(dX_queries, dX_source, dW_Q, dW_K, dW_V)`.
struct PathGrads {
    d_queries: Matrix,
    d_source: Matrix,
    d_wq: Matrix,
    d_wk: Matrix,
    d_wv: Matrix,
}

/// Reverse pass of `Y = X + A V`, `A = softmax(X W_Q (S W_K)ᵀ / sqrt(d_a))`,
/// `V = S W_V` where `X` are the attending rows and `S` the source rows. The
/// residual term is left to the caller.
fn attend_backward(p: &HalParams, x: &Matrix, source: &Matrix, dy: &Matrix) -> Result<PathGrads> {
    let scale = p.inv_sqrt_latent();
    let q = x.matmul(&p.w_q)?;
    let k = source.matmul(&p.w_k)?;
    let v = source.matmul(&p.w_v)?;
    let a = row_softmax(&q.matmul_nt(&k)?.scale(scale))?;

    let (da, dv) = matmul_backward(&a, &v, dy)?;
    let dlogits = row_softmax_backward(&a, &da)?.scale(scale);
    // logits = Q Kᵀ
    let dq = dlogits.matmul(&k)?;
    let dk = dlogits.matmul_tn(&q)?;

    let (dx_q, d_wq) = matmul_backward(x, &p.w_q, &dq)?;
    let (ds_k, d_wk) = matmul_backward(source, &p.w_k, &dk)?;
    let (ds_v, d_wv) = matmul_backward(source, &p.w_v, &dv)?;
    let d_source = ds_k.add(&ds_v)?;
    Ok(PathGrads {
        d_queries: dx_q,
        d_source,
        d_wq,
        d_wk,
        d_wv,
    })
}

/// Reverse pass of [`self_attend`] and [`cross_attend`] given upstream
/// gradients of their outputs.
pub fn hal_backward(
    p: &HalParams,
    xs: &Matrix,
    xq: &Matrix,
    d_xs_ctx: &Matrix,
    d_xq_ctx: &Matrix,
) -> Result<HalBackward> {
    p.check_input(xs, "hal_backward")?;
    p.check_input(xq, "hal_backward")?;
    if d_xs_ctx.shape() != xs.shape() {
        return Err(Error::shape("hal_backward", xs.shape(), d_xs_ctx.shape()));
    }
    if d_xq_ctx.shape() != xq.shape() {
        return Err(Error::shape("hal_backward", xq.shape(), d_xq_ctx.shape()));
    }

    let s = attend_backward(p, xs, xs, d_xs_ctx)?;
    let mut d_support = d_xs_ctx.add(&s.d_queries)?;
    d_support.add_assign(&s.d_source)?;
    let mut grads = Gradients::new();
    grads.accumulate(ParamId::AttnQuery, s.d_wq)?;
    grads.accumulate(ParamId::AttnKey, s.d_wk)?;
    grads.accumulate(ParamId::AttnValue, s.d_wv)?;

    let mut d_query = d_xq_ctx.clone();
    if xq.rows() > 0 {
        let c = attend_backward(p, xq, xs, d_xq_ctx)?;
        d_query.add_assign(&c.d_queries)?;
        d_support.add_assign(&c.d_source)?;
        grads.accumulate(ParamId::AttnQuery, c.d_wq)?;
        grads.accumulate(ParamId::AttnKey, c.d_wk)?;
        grads.accumulate(ParamId::AttnValue, c.d_wv)?;
    }
    Ok(HalBackward {
        grads,
        d_support,
        d_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::check_gradients;
    use alloc::vec;
    use alloc::vec::Vec;

    fn params(seed: u64, d: usize) -> HalParams {
        let mut rng = crate::rng_from_seed(seed);
        HalParams {
            w_q: Matrix::random_normal(d, d, 0.5, &mut rng),
            w_k: Matrix::random_normal(d, d, 0.5, &mut rng),
            w_v: Matrix::random_normal(d, d, 0.5, &mut rng),
        }
    }

    #[test]
    fn zero_value_projection_is_identity() {
        let mut p = params(1, 4);
        p.w_v = Matrix::zeros(4, 4);
        let mut rng = crate::rng_from_seed(2);
        let xs = Matrix::random_normal(5, 4, 1.0, &mut rng);
        let xq = Matrix::random_normal(3, 4, 1.0, &mut rng);
        assert_eq!(self_attend(&p, &xs).unwrap(), xs);
        assert_eq!(cross_attend(&p, &xq, &xs).unwrap(), xq);
    }

    #[test]
    fn single_support_row() {
        let p = params(3, 3);
        let x = Matrix::from_rows(&[[0.4, -1.0, 2.0]]).unwrap();
        let out = self_attend(&p, &x).unwrap();
        let want = x.add(&x.matmul(&p.w_v).unwrap()).unwrap();
        assert!(out.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn matches_step_by_step_recomputation() {
        let p = HalParams::new(
            Matrix::from_rows(&[[0.1, 0.2], [-0.3, 0.4]]).unwrap(),
            Matrix::from_rows(&[[0.5, -0.1], [0.2, 0.3]]).unwrap(),
            Matrix::from_rows(&[[0.05, 0.0], [0.1, -0.2]]).unwrap(),
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let out = self_attend(&p, &x).unwrap();
        for i in 0..2 {
            let xi = x.row(i);
            let q: Vec<f64> = (0..2).map(|c| xi[0] * p.w_q.get(0, c) + xi[1] * p.w_q.get(1, c)).collect();
            let mut logits = [0.0; 2];
            let mut values = [[0.0; 2]; 2];
            for j in 0..2 {
                let xj = x.row(j);
                let k: Vec<f64> = (0..2).map(|c| xj[0] * p.w_k.get(0, c) + xj[1] * p.w_k.get(1, c)).collect();
                for c in 0..2 {
                    values[j][c] = xj[0] * p.w_v.get(0, c) + xj[1] * p.w_v.get(1, c);
                }
                logits[j] = (q[0] * k[0] + q[1] * k[1]) / libm::sqrt(2.0);
            }
            let z = libm::exp(logits[0]) + libm::exp(logits[1]);
            let w = [libm::exp(logits[0]) / z, libm::exp(logits[1]) / z];
            for c in 0..2 {
                let want = xi[c] + w[0] * values[0][c] + w[1] * values[1][c];
                assert!((out.get(i, c) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn saturated_cross_attention_picks_the_matching_support() {
        let d = 3;
        let big = Matrix::identity(d).scale(30.0);
        let w_v = Matrix::from_rows(&[[0.5, 0.0, 0.0], [0.0, -0.5, 0.0], [0.1, 0.0, 1.0]]).unwrap();
        let p = HalParams::new(big.clone(), big, w_v.clone()).unwrap();
        let xs = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let xq = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let out = cross_attend(&p, &xq, &xs).unwrap();
        let want = xq.add(&xs.row_matrix(1).matmul(&w_v).unwrap()).unwrap();
        assert!(out.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn latent_dimension_must_match() {
        let r = HalParams::new(Matrix::zeros(4, 3), Matrix::zeros(4, 3), Matrix::zeros(4, 3));
        assert!(matches!(r, Err(Error::Config(_))));
        let r = HalParams::new(Matrix::zeros(3, 3), Matrix::zeros(3, 3), Matrix::zeros(2, 3));
        assert!(matches!(r, Err(Error::Shape { .. })));
        let p = params(0, 3);
        assert!(self_attend(&p, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = params(4, 3);
        let mut rng = crate::rng_from_seed(5);
        let xs = Matrix::random_normal(4, 3, 1.0, &mut rng);
        let xq = Matrix::random_normal(2, 3, 1.0, &mut rng);
        let b = hal_backward(&p, &xs, &xq, &Matrix::zeros(4, 3), &Matrix::zeros(2, 3)).unwrap();
        for (_, g) in b.grads.iter() {
            assert!(g.as_slice().iter().all(|&v| v == 0.0));
        }
        assert!(b.d_support.as_slice().iter().all(|&v| v == 0.0));
        assert!(b.d_query.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn both_paths_contribute_to_shared_projections() {
        let p = params(6, 3);
        let mut rng = crate::rng_from_seed(7);
        let xs = Matrix::random_normal(4, 3, 1.0, &mut rng);
        let xq = Matrix::random_normal(2, 3, 1.0, &mut rng);
        let gs = Matrix::random_normal(4, 3, 1.0, &mut rng);
        let gq = Matrix::random_normal(2, 3, 1.0, &mut rng);
        let full = hal_backward(&p, &xs, &xq, &gs, &gq).unwrap();
        let self_only = hal_backward(&p, &xs, &xq, &gs, &Matrix::zeros(2, 3)).unwrap();
        let dq_full = full.grads.get(ParamId::AttnQuery).unwrap();
        let dq_self = self_only.grads.get(ParamId::AttnQuery).unwrap();
        assert!(dq_full.max_abs_diff(dq_self) > 1e-6);
    }

    #[test]
    fn hal_gradients_match_finite_differences() {
        for seed in 0..20 {
            let d = 2 + (seed as usize % 3);
            let p = params(100 + seed, d);
            let mut rng = crate::rng_from_seed(200 + seed);
            let xs = Matrix::random_normal(3 + seed as usize % 2, d, 1.0, &mut rng);
            let xq = Matrix::random_normal(2, d, 1.0, &mut rng);
            let gs = Matrix::random_normal(xs.rows(), d, 1.0, &mut rng);
            let gq = Matrix::random_normal(2, d, 1.0, &mut rng);
            let inner = |a: &Matrix, b: &Matrix| -> f64 {
                a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
            };
            let err = check_gradients(&[p.w_q.clone(), p.w_k.clone(), p.w_v.clone(), xs, xq], |m| {
                let hp = HalParams::new(m[0].clone(), m[1].clone(), m[2].clone())?;
                let s = self_attend(&hp, &m[3])?;
                let c = cross_attend(&hp, &m[4], &m[3])?;
                let value = inner(&s, &gs) + inner(&c, &gq);
                let b = hal_backward(&hp, &m[3], &m[4], &gs, &gq)?;
                Ok((
                    value,
                    vec![
                        b.grads.get(ParamId::AttnQuery).unwrap().clone(),
                        b.grads.get(ParamId::AttnKey).unwrap().clone(),
                        b.grads.get(ParamId::AttnValue).unwrap().clone(),
                        b.d_support,
                        b.d_query,
                    ],
                ))
            })
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }
}
