//! Small dense helpers shared across modules.

use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::Matrix;

/// Pairwise squared Euclidean distances between the rows of `x` and `y`.
pub fn sq_distances(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_dim(x.ncols(), y.ncols())?;
    let d = x.ncols();
    Ok(Matrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            let t = x[(i, k)] - y[(j, k)];
            s += t * t;
        }
        s
    }))
}

pub fn col_means(x: &Matrix) -> Vec<f64> {
    let n = x.nrows().max(1) as f64;
    (0..x.ncols()).map(|j| x.column(j).sum() / n).collect()
}

/// `⟨a, b⟩_F`.
pub fn frobenius(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Per-feature affine standardization fitted on one matrix and applied to
/// others. Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mean = col_means(x);
        let n = x.nrows();
        let scale = (0..x.ncols())
            .map(|j| {
                if n < 2 {
                    return 1.0;
                }
                let v = x.column(j).iter().map(|v| (v - mean[j]) * (v - mean[j])).sum::<f64>()
                    / (n - 1) as f64;
                let s = libm::sqrt(v);
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }
}
