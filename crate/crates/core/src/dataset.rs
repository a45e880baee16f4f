//! Domain types shared by every algorithm: labeled datasets, empirical
//! distributions and weights on the probability simplex.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::Matrix;

/// Opaque domain tag (an operating mode, a source index, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainId(pub u32);

/// Feature matrix plus integer class labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    domain: DomainId,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
        domain: DomainId,
    ) -> Result<Self> {
        check_dim(features.nrows(), labels.len())?;
        if class_count == 0 {
            return Err(Error::invalid("class_count must be positive"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(LabeledDataset { features, labels, class_count, domain })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn one_hot(&self) -> Matrix {
        one_hot_unchecked(&self.labels, self.class_count)
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: select_rows(&self.features, indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            domain: self.domain,
        }
    }

    /// Same labels, new features (e.g. transported or projected).
    pub fn with_features(&self, features: Matrix) -> Result<LabeledDataset> {
        LabeledDataset::new(features, self.labels.clone(), self.class_count, self.domain)
    }

    /// Stack several datasets into one homogeneous domain.
    pub fn concat(parts: &[&LabeledDataset], domain: DomainId) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("cannot concatenate zero datasets"))?;
        let dim = first.dim();
        let class_count = first.class_count;
        let mut rows = 0;
        for p in parts {
            check_dim(dim, p.dim())?;
            check_dim(class_count, p.class_count)?;
            rows += p.len();
        }
        let mut features = Matrix::zeros(rows, dim);
        let mut labels = Vec::with_capacity(rows);
        let mut at = 0;
        for p in parts {
            features.rows_mut(at, p.len()).copy_from(&p.features);
            labels.extend_from_slice(&p.labels);
            at += p.len();
        }
        Ok(LabeledDataset { features, labels, class_count, domain })
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

pub(crate) fn select_rows(m: &Matrix, indices: &[usize]) -> Matrix {
    Matrix::from_fn(indices.len(), m.ncols(), |r, c| m[(indices[r], c)])
}

fn one_hot_unchecked(labels: &[usize], n_classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (i, &y) in labels.iter().enumerate() {
        m[(i, y)] = 1.0;
    }
    m
}

/// One-hot encoding of `labels` over `n_classes` columns.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    if let Some(bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(one_hot_unchecked(labels, n_classes))
}

/// Row-wise argmax; ties go to the lowest column index.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.nrows())
        .map(|i| {
            let mut best = 0;
            for j in 1..m.ncols() {
                if m[(i, j)] > m[(i, best)] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub(crate) fn validate_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid(format!("{what}: weights must be finite and nonnegative")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what}: weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Weighted point cloud `Σ w_i δ(x - x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    support: Matrix,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(support: Matrix, weights: Vec<f64>) -> Result<Self> {
        check_dim(support.nrows(), weights.len())?;
        validate_weights(&weights, "empirical distribution")?;
        Ok(EmpiricalDistribution { support, weights })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(support: Matrix) -> Result<Self> {
        let n = support.nrows();
        if n == 0 {
            return Err(Error::invalid("empirical distribution needs at least one point"));
        }
        Ok(EmpiricalDistribution { support, weights: alloc::vec![1.0 / n as f64; n] })
    }

    /// `as_empirical`: the feature rows of `ds` with uniform weight.
    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        Self::uniform(ds.features.clone())
    }

    pub fn support(&self) -> &Matrix {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.ncols()
    }
}

/// Empirical distribution over (feature, soft label) pairs. Label rows live
/// on the probability simplex of `n_classes` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabeled {
    pub features: Matrix,
    pub labels: Matrix,
    pub weights: Vec<f64>,
}

impl SoftLabeled {
    pub fn new(features: Matrix, labels: Matrix, weights: Vec<f64>) -> Result<Self> {
        check_dim(features.nrows(), labels.nrows())?;
        check_dim(features.nrows(), weights.len())?;
        validate_weights(&weights, "labeled distribution")?;
        Ok(SoftLabeled { features, labels, weights })
    }

    pub fn uniform(features: Matrix, labels: Matrix) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::invalid("labeled distribution needs at least one point"));
        }
        Self::new(features, labels, alloc::vec![1.0 / n as f64; n])
    }

    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        Self::uniform(ds.features.clone(), ds.one_hot())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.labels.ncols()
    }

    /// Harden soft labels by argmax.
    pub fn to_dataset(&self, domain: DomainId) -> Result<LabeledDataset> {
        LabeledDataset::new(
            self.features.clone(),
            argmax_rows(&self.labels),
            self.labels.ncols(),
            domain,
        )
    }
}

/// Barycentric coordinates: a point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimplexWeights {
    values: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("simplex weights cannot be empty"));
        }
        validate_weights(&values, "simplex weights")?;
        Ok(SimplexWeights { values })
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        SimplexWeights { values: alloc::vec![1.0 / k as f64; k] }
    }

    pub fn vertex(k: usize, j: usize) -> Self {
        let mut values = alloc::vec![0.0; k];
        values[j] = 1.0;
        SimplexWeights { values }
    }

    /// Euclidean projection of an arbitrary vector onto the simplex
    /// (sort-based; Held, Wolfe and Crowder).
    pub fn project(v: &[f64]) -> Self {
        assert!(!v.is_empty());
        let mut u: Vec<f64> = v.to_vec();
        u.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut cum = 0.0;
        let mut theta = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            cum += uk;
            let t = (cum - 1.0) / (k + 1) as f64;
            if uk - t > 0.0 {
                theta = t;
            }
        }
        let mut values: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
        // Absorb rounding so the invariant holds to machine precision.
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|x| *x /= total);
        SimplexWeights { values }
    }

    /// Normalize nonnegative values to sum one (entropic mirror step output).
    pub fn normalize(v: &[f64]) -> Result<Self> {
        let total: f64 = v.iter().sum();
        if !(total > 0.0) || v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::invalid("cannot normalize onto the simplex"));
        }
        Ok(SimplexWeights { values: v.iter().map(|x| x / total).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_hot_examples() {
        let m = one_hot(&[0, 2, 1], 3).unwrap();
        assert_eq!(m, Matrix::from_row_slice(3, 3, &[1., 0., 0., 0., 0., 1., 0., 1., 0.]));
        let empty = one_hot(&[], 3).unwrap();
        assert_eq!((empty.nrows(), empty.ncols()), (0, 3));
        assert_eq!(one_hot(&[0, 0], 1).unwrap(), Matrix::from_element(2, 1, 1.0));
        assert!(matches!(one_hot(&[3], 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn as_empirical_uniform() {
        for n in [4usize, 1, 3] {
            let x = Matrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64 * 0.3);
            let ds = LabeledDataset::new(x.clone(), vec![0; n], 2, DomainId(0)).unwrap();
            let p = EmpiricalDistribution::from_dataset(&ds).unwrap();
            assert!(p.weights().iter().all(|w| *w == 1.0 / n as f64));
            assert_eq!(p.support(), &x);
            assert_eq!(p.dim(), 2);
        }
        let empty = LabeledDataset::new(Matrix::zeros(0, 2), vec![], 2, DomainId(0)).unwrap();
        assert!(EmpiricalDistribution::from_dataset(&empty).is_err());
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let x = Matrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(LabeledDataset::new(x, vec![0, 0], 1, DomainId(0)).is_err());
        let x = Matrix::zeros(2, 1);
        assert!(LabeledDataset::new(x.clone(), vec![0, 2], 2, DomainId(0)).is_err());
        assert!(LabeledDataset::new(x, vec![0], 2, DomainId(0)).is_err());
    }

    #[test]
    fn simplex_projection() {
        let w = SimplexWeights::project(&[0.2, 0.9, -0.5]);
        assert!((w.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.values().iter().all(|x| *x >= 0.0));
        assert!((w.values()[1] - 0.85).abs() < 1e-12);
        assert!((w.values()[0] - 0.15).abs() < 1e-12);
        let w = SimplexWeights::project(&[0.25, 0.75]);
        assert_eq!(w.values(), &[0.25, 0.75]);
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        let m = Matrix::from_row_slice(2, 3, &[0.2, 0.4, 0.4, 0.5, 0.1, 0.4]);
        assert_eq!(argmax_rows(&m), vec![1, 0]);
    }
}
