use crate::error::{check_dim, Result};
use crate::Matrix;

/// Probabilities are clipped to `[PROB_FLOOR, 1]` before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Row-wise softmax, shifted by the row max.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for mut row in p.row_iter_mut() {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        row.apply(|v| *v = libm::exp(*v - m));
        let s = row.sum();
        row /= s;
    }
    p
}

/// Mean categorical cross-entropy `-(1/n) Σ_i Σ_c y_ic log ŷ_ic`.
pub fn cce_loss(probs: &Matrix, targets: &Matrix) -> Result<f64> {
    soft_cce_loss(probs, targets, 1.0 / probs.nrows().max(1) as f64)
}

/// `-scale · Σ_i Σ_c t_ic log ŷ_ic` for arbitrary nonnegative targets.
pub fn soft_cce_loss(probs: &Matrix, targets: &Matrix, scale: f64) -> Result<f64> {
    check_dim(probs.nrows(), targets.nrows())?;
    check_dim(probs.ncols(), targets.ncols())?;
    let mut s = 0.0;
    for (p, t) in probs.iter().zip(targets.iter()) {
        if *t != 0.0 {
            s -= t * libm::log(p.clamp(PROB_FLOOR, 1.0));
        }
    }
    Ok(scale * s)
}

/// Gradient of [`soft_cce_loss`] with respect to the logits behind `probs`:
/// `scale · (ŷ_i Σ_c t_ic - t_i)`. For one-hot targets and `scale = 1/n`
/// this is `(ŷ - y)/n`.
pub fn soft_cce_grad_logits(probs: &Matrix, targets: &Matrix, scale: f64) -> Matrix {
    let mut g = Matrix::zeros(probs.nrows(), probs.ncols());
    for i in 0..probs.nrows() {
        let mass = targets.row(i).sum();
        for c in 0..probs.ncols() {
            g[(i, c)] = scale * (probs[(i, c)] * mass - targets[(i, c)]);
        }
    }
    g
}

/// Mean binary cross-entropy of sigmoid outputs `s` against `{0,1}` labels.
pub fn bce_loss(s: &[f64], d: &[f64]) -> Result<f64> {
    check_dim(s.len(), d.len())?;
    let n = s.len().max(1) as f64;
    let mut l = 0.0;
    for (p, y) in s.iter().zip(d) {
        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        l -= y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p);
    }
    Ok(l / n)
}
