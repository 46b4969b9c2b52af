use alloc::format;
use alloc::vec::Vec;

use super::matrix::{dot, norm};
use super::Matrix;
use crate::{Error, Result};

/// Lower bound applied to row norms in gradient denominators only.
pub const GRAD_NORM_FLOOR: f64 = 1e-12;

/// Reverse pass of `c = a · b`: returns `(dc · bᵀ, aᵀ · dc)`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, dc: &Matrix) -> Result<(Matrix, Matrix)> {
    if dc.shape() != (a.rows(), b.cols()) || a.cols() != b.rows() {
        return Err(Error::shape("matmul_backward", a.shape(), b.shape()));
    }
    Ok((dc.matmul_nt(b)?, a.matmul_tn(dc)?))
}

/// Row-wise softmax with per-row max subtraction.
pub fn row_softmax(a: &Matrix) -> Result<Matrix> {
    if a.is_empty() {
        return Err(Error::Precondition(format!(
            "row_softmax of an empty {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let mut out = a.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `log Σ exp(row)`, stable.
pub(crate) fn log_sum_exp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = row.map(|v| libm::exp(v - max)).sum();
    max + libm::log(total)
}

/// Reverse pass of row softmax given its output `y` and upstream `dy`.
pub fn row_softmax_backward(y: &Matrix, dy: &Matrix) -> Result<Matrix> {
    if y.shape() != dy.shape() {
        return Err(Error::shape("row_softmax_backward", y.shape(), dy.shape()));
    }
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, dyr) = (y.row(r), dy.row(r));
        let inner = dot(yr, dyr);
        for ((o, &p), &g) in dx.row_mut(r).iter_mut().zip(yr).zip(dyr) {
            *o = p * (g - inner);
        }
    }
    Ok(dx)
}

fn row_norms(m: &Matrix, op: &'static str, operand: &'static str) -> Result<Vec<f64>> {
    (0..m.rows())
        .map(|r| {
            let n = norm(m.row(r));
            if n == 0.0 || !n.is_finite() {
                Err(Error::Degenerate { op, operand, row: r })
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Pairwise cosine similarity: `out[i][j] = cos(a_i, b_j)`.
///
/// A zero-norm row in either argument is an error; no flooring is applied to
/// values.
pub fn cosine_rows(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::shape("cosine_rows", a.shape(), b.shape()));
    }
    let na = row_norms(a, "cosine_rows", "left")?;
    let nb = row_norms(b, "cosine_rows", "right")?;
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            let c = dot(a.row(i), b.row(j)) / (na[i] * nb[j]);
            out.set(i, j, c.clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

/// Reverse pass of [`cosine_rows`]; returns `(da, db)`.
pub fn cosine_rows_backward(a: &Matrix, b: &Matrix, dout: &Matrix) -> Result<(Matrix, Matrix)> {
    if a.cols() != b.cols() || dout.shape() != (a.rows(), b.rows()) {
        return Err(Error::shape("cosine_rows_backward", a.shape(), b.shape()));
    }
    let na: Vec<f64> = (0..a.rows()).map(|r| norm(a.row(r)).max(GRAD_NORM_FLOOR)).collect();
    let nb: Vec<f64> = (0..b.rows()).map(|r| norm(b.row(r)).max(GRAD_NORM_FLOOR)).collect();
    let mut da = Matrix::zeros(a.rows(), a.cols());
    let mut db = Matrix::zeros(b.rows(), b.cols());
    for i in 0..a.rows() {
        let ai = a.row(i);
        for j in 0..b.rows() {
            let g = dout.get(i, j);
            if g == 0.0 {
                continue;
            }
            let bj = b.row(j);
            let cos = dot(ai, bj) / (na[i] * nb[j]);
            // d cos / d a_i = b_j / (|a_i||b_j|) - cos * a_i / |a_i|^2
            let sa = g / (na[i] * nb[j]);
            let ta = g * cos / (na[i] * na[i]);
            for ((o, &x), &y) in da.row_mut(i).iter_mut().zip(ai).zip(bj) {
                *o += sa * y - ta * x;
            }
            let tb = g * cos / (nb[j] * nb[j]);
            for ((o, &x), &y) in db.row_mut(j).iter_mut().zip(ai).zip(bj) {
                *o += sa * x - tb * y;
            }
        }
    }
    Ok((da, db))
}

/// One output row per group: the arithmetic mean of the selected rows.
pub fn mean_rows<G: AsRef<[usize]>>(a: &Matrix, groups: &[G]) -> Result<Matrix> {
    let mut out = Matrix::zeros(groups.len(), a.cols());
    for (g, group) in groups.iter().enumerate() {
        let group = group.as_ref();
        if group.is_empty() {
            return Err(Error::Precondition(format!("mean_rows: group {g} is empty")));
        }
        let inv = 1.0 / group.len() as f64;
        let out_row = out.row_mut(g);
        for &i in group {
            if i >= a.rows() {
                return Err(Error::Precondition(format!(
                    "mean_rows: index {i} out of range for {} rows",
                    a.rows()
                )));
            }
            for (o, &v) in out_row.iter_mut().zip(a.row(i)) {
                *o += v;
            }
        }
        for o in out_row.iter_mut() {
            *o *= inv;
        }
    }
    Ok(out)
}

/// Reverse pass of [`mean_rows`]: each member of group `g` receives
/// `dout[g] / |g|`.
pub fn mean_rows_backward<G: AsRef<[usize]>>(
    input_rows: usize,
    groups: &[G],
    dout: &Matrix,
) -> Result<Matrix> {
    if dout.rows() != groups.len() {
        return Err(Error::shape(
            "mean_rows_backward",
            (groups.len(), dout.cols()),
            dout.shape(),
        ));
    }
    let mut da = Matrix::zeros(input_rows, dout.cols());
    for (g, group) in groups.iter().enumerate() {
        let group = group.as_ref();
        let inv = 1.0 / group.len() as f64;
        for &i in group {
            if i >= input_rows {
                return Err(Error::Precondition(format!(
                    "mean_rows_backward: index {i} out of range for {input_rows} rows"
                )));
            }
            for (o, &v) in da.row_mut(i).iter_mut().zip(dout.row(g)) {
                *o += v * inv;
            }
        }
    }
    Ok(da)
}
