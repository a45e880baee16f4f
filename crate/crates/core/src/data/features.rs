use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Matrix;

/// Mean, sample standard deviation, min, max and least-squares slope
/// against the step index.
pub const FEATURES_PER_CHANNEL: usize = 5;

/// Fixed-length summary of a `T × channels` segment, one block of
/// [`FEATURES_PER_CHANNEL`] values per channel in channel order.
pub fn extract_features(segment: &Matrix) -> Result<Vec<f64>> {
    let t = segment.nrows();
    if t < 2 {
        return Err(Error::invalid("feature extraction needs at least two steps"));
    }
    let tf = t as f64;
    let t_mean = (tf - 1.0) / 2.0;
    // Σ (i - t̄)² over i = 0..T-1.
    let t_ss = tf * (tf * tf - 1.0) / 12.0;
    let mut out = Vec::with_capacity(segment.ncols() * FEATURES_PER_CHANNEL);
    for col in segment.column_iter() {
        let mean = col.sum() / tf;
        let (mut ss, mut sxy) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &v) in col.iter().enumerate() {
            let d = v - mean;
            ss += d * d;
            sxy += (i as f64 - t_mean) * d;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        out.extend([mean, libm::sqrt(ss / (tf - 1.0)), lo, hi, sxy / t_ss]);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("segment features".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;
    use alloc::vec;

    #[test]
    fn constant_and_ramp_channels() {
        let seg = Matrix::from_fn(50, 2, |i, j| if j == 0 { 3.5 } else { i as f64 });
        let f = extract_features(&seg).unwrap();
        assert_eq!(&f[..5], &[3.5, 0.0, 3.5, 3.5, 0.0]);
        assert!((f[9] - 1.0).abs() < 1e-9);
        assert!(extract_features(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = Rng::new(3);
        let seg = Matrix::from_fn(37, 4, |_, _| rng.normal() * 2.0 + 1.0);
        let f = extract_features(&seg).unwrap();
        for c in 0..4 {
            let x: Vec<f64> = (0..37).map(|i| seg[(i, c)]).collect();
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            // Slope from the normal equations on (1, t).
            let (st, stt, sy, sty) = x.iter().enumerate().fold((0.0, 0.0, 0.0, 0.0), |a, (i, v)| {
                let t = i as f64;
                (a.0 + t, a.1 + t * t, a.2 + v, a.3 + t * v)
            });
            let slope = (n * sty - st * sy) / (n * stt - st * st);
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expected = vec![mean, var.sqrt(), lo, hi, slope];
            for (a, b) in f[c * 5..c * 5 + 5].iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}
