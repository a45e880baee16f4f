//! Finite-difference probes for hand-written gradients.

use alloc::vec::Vec;

use crate::Rng;

/// Central differences `(f(θ + h e_k) - f(θ - h e_k)) / 2h` at the given
/// parameter indices.
pub fn central_difference<F>(f: &F, params: &[f64], indices: &[usize], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut theta = params.to_vec();
    indices
        .iter()
        .map(|&k| {
            let orig = theta[k];
            theta[k] = orig + h;
            let up = f(&theta);
            theta[k] = orig - h;
            let down = f(&theta);
            theta[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst `|a - b| / max(|a|, |b|, 1e-6)` between an analytic gradient (full
/// vector) and finite differences taken at `indices`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], indices: &[usize]) -> f64 {
    indices
        .iter()
        .zip(numeric)
        .map(|(&k, &n)| {
            let a = analytic[k];
            (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
        })
        .fold(0.0, f64::max)
}

/// `k` distinct parameter indices in `range`, sorted.
pub fn probe_indices(range: core::ops::Range<usize>, k: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> =
        rng.sample_indices(range.len(), k).into_iter().map(|i| i + range.start).collect();
    idx.sort_unstable();
    idx
}
