use alloc::vec::Vec;

use crate::dataset::{DomainId, LabeledDataset};
use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Rng};

/// `x ↦ A x + b`, with `A` stored row by row.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineMap {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineMap {
    pub fn identity(d: usize) -> Self {
        let a = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        AffineMap { a, b: alloc::vec![0.0; d] }
    }

    pub fn translation(b: Vec<f64>) -> Self {
        AffineMap { a: Self::identity(b.len()).a, b }
    }

    fn matrix(&self) -> Result<Matrix> {
        let d = self.b.len();
        check_dim(d, self.a.len())?;
        for r in &self.a {
            check_dim(d, r.len())?;
        }
        Ok(Matrix::from_fn(d, d, |i, j| self.a[i][j]))
    }

    /// Applies the map to every row of `x`.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let a = self.matrix()?;
        check_dim(a.ncols(), x.ncols())?;
        let mut y = x * a.transpose();
        for mut r in y.row_iter_mut() {
            for (v, b) in r.iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        Ok(y)
    }
}

/// One synthetic operating mode: isotropic Gaussian classes pushed through
/// an affine map.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSpec {
    pub class_means: Vec<Vec<f64>>,
    /// Standard deviation of every coordinate before the map.
    pub noise_std: f64,
    pub transform: AffineMap,
    pub priors: Vec<f64>,
}

impl ModeSpec {
    pub fn dim(&self) -> usize {
        self.class_means.first().map_or(0, Vec::len)
    }

    pub fn class_count(&self) -> usize {
        self.class_means.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count() < 2 {
            return Err(Error::invalid("a mode needs at least two classes"));
        }
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("class means must be nonempty"));
        }
        for m in &self.class_means {
            check_dim(d, m.len())?;
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("degenerate covariance: noise_std must be positive"));
        }
        check_dim(self.class_count(), self.priors.len())?;
        crate::dataset::validate_weights(&self.priors, "class priors")?;
        let a = self.transform.matrix()?;
        check_dim(d, a.nrows())?;
        let det = a.clone().lu().determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::invalid("mode transform is not invertible"));
        }
        Ok(())
    }
}

/// `n_per_mode` samples from every mode; mode `m` gets `DomainId(m)`.
pub fn gen_synthetic_modes(specs: &[ModeSpec], n_per_mode: usize, rng: &mut Rng) -> Result<Vec<LabeledDataset>> {
    let first = specs.first().ok_or_else(|| Error::invalid("no modes given"))?;
    for s in specs {
        s.validate()?;
        check_dim(first.dim(), s.dim())?;
        check_dim(first.class_count(), s.class_count())?;
    }
    specs
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let labels: Vec<usize> = (0..n_per_mode).map(|_| rng.categorical(&s.priors)).collect();
            let x = Matrix::from_fn(n_per_mode, s.dim(), |i, j| s.class_means[labels[i]][j] + s.noise_std * rng.normal());
            let x = s.transform.apply(&x)?;
            LabeledDataset::new(x, labels, s.class_count(), DomainId(m as u32))
        })
        .collect()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Bayes-optimal accuracy of a two-class mode. An invertible affine map
/// does not change it, so the base problem is used.
pub fn bayes_accuracy(spec: &ModeSpec) -> Result<f64> {
    spec.validate()?;
    if spec.class_count() != 2 {
        return Err(Error::Unsupported("closed-form Bayes accuracy needs exactly two classes".into()));
    }
    let (p0, p1) = (spec.priors[0], spec.priors[1]);
    if p0 == 0.0 || p1 == 0.0 {
        return Ok(1.0);
    }
    let delta = libm::sqrt(
        spec.class_means[0].iter().zip(&spec.class_means[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
    );
    let s = spec.noise_std;
    if delta == 0.0 {
        return Ok(p0.max(p1));
    }
    // Boundary offset from the midpoint along the mean difference.
    let k = s * s * libm::log(p0 / p1) / delta;
    Ok(p0 * normal_cdf((delta / 2.0 + k) / s) + p1 * normal_cdf((delta / 2.0 - k) / s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{h_distance, DomainClassifierConfig};
    use crate::ot::{barycentric_map, cost_matrix, solve_ot_exact};
    use crate::linalg::col_means;
    use alloc::vec;

    fn spec(transform: AffineMap) -> ModeSpec {
        ModeSpec {
            class_means: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            noise_std: 0.7,
            transform,
            priors: vec![0.5, 0.5],
        }
    }

    #[test]
    fn identical_modes_are_indistinguishable() {
        let mut rng = Rng::new(1);
        let modes = gen_synthetic_modes(&[spec(AffineMap::identity(2)), spec(AffineMap::identity(2))], 400, &mut rng)
            .unwrap();
        let h = h_distance(modes[0].features(), modes[1].features(), &DomainClassifierConfig::default(), &mut rng)
            .unwrap();
        assert!(h.proxy_a <= 0.2, "{}", h.proxy_a);
    }

    #[test]
    fn translation_is_recovered_by_ot() {
        let mut rng = Rng::new(2);
        let s = gen_synthetic_modes(&[spec(AffineMap::identity(2))], 100, &mut rng).unwrap().remove(0);
        let t = AffineMap::translation(vec![2.0, -1.0]).apply(s.features()).unwrap();
        let plan = solve_ot_exact(&[0.01; 100], &[0.01; 100], &cost_matrix(s.features(), &t).unwrap()).unwrap();
        let moved = barycentric_map(&plan, &t).unwrap();
        let (a, b) = (col_means(&moved), col_means(s.features()));
        assert!((a[0] - b[0] - 2.0).abs() < 1e-2 && (a[1] - b[1] + 1.0).abs() < 1e-2);
    }

    #[test]
    fn degenerate_priors_and_specs() {
        let mut rng = Rng::new(3);
        let mut one = spec(AffineMap::identity(2));
        one.priors = vec![1.0, 0.0];
        let ds = gen_synthetic_modes(&[one], 50, &mut rng).unwrap();
        assert!(ds[0].labels().iter().all(|&l| l == 0));
        let mut bad = spec(AffineMap { a: vec![vec![1.0, 2.0], vec![2.0, 4.0]], b: vec![0.0, 0.0] });
        assert!(bad.validate().is_err());
        bad.transform = AffineMap::identity(2);
        bad.noise_std = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn class_means_follow_the_map() {
        let mut rng = Rng::new(4);
        let map = AffineMap { a: vec![vec![2.0, 0.5], vec![0.0, 1.0]], b: vec![1.0, -3.0] };
        let n = 10_000;
        let ds = gen_synthetic_modes(&[spec(map.clone())], n, &mut rng).unwrap().remove(0);
        for c in 0..2 {
            let rows: Vec<usize> = (0..n).filter(|&i| ds.labels()[i] == c).collect();
            let mu = map.apply(&Matrix::from_row_slice(1, 2, &spec(map.clone()).class_means[c])).unwrap();
            for j in 0..2 {
                let m = rows.iter().map(|&i| ds.features()[(i, j)]).sum::<f64>() / rows.len() as f64;
                // Scale the tolerance by the mapped noise level of this coordinate.
                let sd = 0.7 * map.a[j].iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((m - mu[(0, j)]).abs() < 3.0 * sd / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn bayes_accuracy_closed_form() {
        let s = spec(AffineMap::identity(2));
        // Equal priors: Φ(Δ / 2σ).
        let expected = normal_cdf(1.0 / 0.7);
        assert!((bayes_accuracy(&s).unwrap() - expected).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        let mut rng = Rng::new(5);
        let mut skew = s.clone();
        skew.priors = vec![0.8, 0.2];
        let ds = gen_synthetic_modes(&[skew.clone()], 20_000, &mut rng).unwrap().remove(0);
        // Plug-in Bayes rule as an empirical oracle.
        let hits = (0..ds.len())
            .filter(|&i| {
                let x = ds.features()[(i, 0)];
                let score = |c: usize| libm::log(skew.priors[c]) - (x - skew.class_means[c][0]).powi(2) / (2.0 * 0.49);
                usize::from(score(1) > score(0)) == ds.labels()[i]
            })
            .count();
        let empirical = hits as f64 / ds.len() as f64;
        assert!((empirical - bayes_accuracy(&skew).unwrap()).abs() < 0.01);
    }
}
