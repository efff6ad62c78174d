//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter tried after a plain factorization fails: 1e-10 * 10^k, k = 0..=4.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of a symmetric PSD matrix, retrying with diagonal jitter.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let scale = a.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for jitter in JITTER_LADDER {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += jitter * scale;
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok(c);
        }
    }
    Err(Error::Numerical(format!(
        "cholesky failed on {}x{} matrix after jitter ladder",
        a.nrows(),
        a.ncols()
    )))
}

pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// log-determinant from a Cholesky factor.
pub fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
