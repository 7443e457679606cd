//! Orthonormal DCT-II along the lag axis of each window.

use crate::datagen::{Dataset, Standardizer};
use crate::error::{invalid, shape, Result};
use crate::numerics::Matrix;

/// W_{k,n} = s_k cos(π (n + ½) k / p), s_0 = √(1/p), s_k = √(2/p).
#[derive(Debug, Clone, PartialEq)]
pub struct DctMatrix {
    p: usize,
    w: Matrix,
}

pub fn dct_matrix(p: usize) -> Result<DctMatrix> {
    if p == 0 {
        return Err(invalid("DCT dimension must be positive"));
    }
    let pf = p as f64;
    let mut w = Matrix::zeros(p, p);
    for k in 0..p {
        let s = if k == 0 { (1.0 / pf).sqrt() } else { (2.0 / pf).sqrt() };
        for n in 0..p {
            w[(k, n)] = s * (std::f64::consts::PI * (n as f64 + 0.5) * k as f64 / pf).cos();
        }
    }
    Ok(DctMatrix { p, w })
}

impl DctMatrix {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    /// Transforms a single vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.w.matvec(x)
    }
}

/// Replaces each row r of `x` by W r.
pub fn apply_dct(dct: &DctMatrix, x: &Matrix) -> Result<Matrix> {
    transform_rows(&dct.w, x)
}

/// Replaces each row r of `x` by Wᵀ r (the inverse transform).
pub fn apply_inverse_dct(dct: &DctMatrix, x: &Matrix) -> Result<Matrix> {
    transform_rows(&dct.w.transpose(), x)
}

fn transform_rows(w: &Matrix, x: &Matrix) -> Result<Matrix> {
    if x.cols() != w.cols() {
        return Err(shape(format!("DCT of size {} applied to {} columns", w.cols(), x.cols())));
    }
    // rows of X times Wᵀ
    x.matmul(&w.transpose())
}

/// DCT-KAN input: transform the standardized windows, then re-standardize
/// with statistics of the transformed training rows. Targets are unchanged.
pub fn dct_dataset(ds: &Dataset) -> Result<Dataset> {
    let dct = dct_matrix(ds.lags())?;
    let transformed = apply_dct(&dct, &ds.x)?;
    let std = Standardizer::fit(&transformed.slice_rows(0, ds.split_index))?;
    ds.with_inputs(std.apply(&transformed)?)
}
