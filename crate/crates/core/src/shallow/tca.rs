//! Transfer component analysis, fitted and applied transductively on the
//! joint source + target sample.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::divergence::{kernel_matrix, KernelSpec};
use crate::error::{check_dim, Error, Result};
use crate::Matrix;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TcaModel {
    /// `n × n_f'` coefficients; `T(X) = K W`.
    pub projection: Matrix,
    /// Joint training sample `[source; target]`.
    pub joint: Matrix,
    pub n_source: usize,
    pub kernel: KernelSpec,
    pub mu: f64,
    /// Retained eigenvalues of `(I + μKLK)⁻¹ KHK`, descending.
    pub eigenvalues: Vec<f64>,
}

impl TcaModel {
    /// Number of retained components (may be below the requested count when
    /// `KHK` is rank deficient).
    pub fn effective_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Embedding `K W` of the whole joint training sample.
    pub fn transform_joint(&self) -> Result<Matrix> {
        Ok(kernel_matrix(&self.joint, &self.joint, &self.kernel)? * &self.projection)
    }

    /// Embedding of rows taken from the joint training sample. Other rows
    /// need an out-of-sample extension, which is not provided.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        check_dim(self.joint.ncols(), x.ncols())?;
        for i in 0..x.nrows() {
            let known = (0..self.joint.nrows()).any(|r| self.joint.row(r) == x.row(i));
            if !known {
                return Err(Error::Unsupported(format!(
                    "row {i} is not part of the TCA training sample"
                )));
            }
        }
        Ok(kernel_matrix(x, &self.joint, &self.kernel)? * &self.projection)
    }

    pub fn transform_source(&self) -> Result<Matrix> {
        let t = self.transform_joint()?;
        Ok(t.rows(0, self.n_source).into_owned())
    }

    pub fn transform_target(&self) -> Result<Matrix> {
        let t = self.transform_joint()?;
        Ok(t.rows(self.n_source, t.nrows() - self.n_source).into_owned())
    }

    /// `‖(I + μKLK) w - (1/λ) KHK w‖` for every retained column.
    pub fn eigen_residuals(&self) -> Result<Vec<f64>> {
        let (a, b) = tca_matrices(&self.joint, self.n_source, &self.kernel, self.mu)?;
        Ok((0..self.projection.ncols())
            .map(|c| {
                let w = self.projection.column(c);
                (&a * w - (&b * w) / self.eigenvalues[c]).norm()
            })
            .collect())
    }
}

/// `(I + μ K L K, K H K)` on the joint sample.
fn tca_matrices(joint: &Matrix, n_s: usize, kernel: &KernelSpec, mu: f64) -> Result<(Matrix, Matrix)> {
    let n = joint.nrows();
    let n_t = n - n_s;
    let k = kernel_matrix(joint, joint, kernel)?;
    let e: Vec<f64> =
        (0..n).map(|i| if i < n_s { 1.0 / n_s as f64 } else { -1.0 / n_t as f64 }).collect();
    // K L K = (K e)(K e)ᵀ since L = e eᵀ.
    let ke = &k * Matrix::from_column_slice(n, 1, &e);
    let a = Matrix::identity(n, n) + (&ke * ke.transpose()) * mu;
    let mut kc = k.clone();
    // K H = K - (K 1) 1ᵀ / n.
    for i in 0..n {
        let m = k.row(i).sum() / n as f64;
        kc.row_mut(i).add_scalar_mut(-m);
    }
    let b = &kc * &k;
    let b = (&b + b.transpose()) * 0.5;
    Ok((a, b))
}

/// Fit TCA with `n_components` requested directions.
pub fn tca_fit(
    source: &Matrix,
    target: &Matrix,
    kernel: KernelSpec,
    mu: f64,
    n_components: usize,
) -> Result<TcaModel> {
    check_dim(source.ncols(), target.ncols())?;
    kernel.validate()?;
    let (n_s, n_t) = (source.nrows(), target.nrows());
    if n_s == 0 || n_t == 0 {
        return Err(Error::invalid("TCA needs nonempty source and target"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("TCA penalty mu must be positive"));
    }
    let n = n_s + n_t;
    if n_components == 0 || n_components > n {
        return Err(Error::invalid(format!("TCA dimension must lie in 1..={n}")));
    }
    let joint = Matrix::from_fn(n, source.ncols(), |i, j| {
        if i < n_s {
            source[(i, j)]
        } else {
            target[(i - n_s, j)]
        }
    });
    let (a, b) = tca_matrices(&joint, n_s, &kernel, mu)?;
    // A is I plus a PSD term, so the factorization cannot fail for a PSD K.
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Solver("I + mu KLK is not positive definite; is the kernel PSD?".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&b)
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .take(n_components)
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL * top && eig.eigenvalues[i] > 0.0)
        .collect();
    if keep.len() < n_components {
        log::info!("tca: kept {} of {n_components} components (rank deficient KHK)", keep.len());
    }
    let mut projection = Matrix::zeros(n, keep.len());
    let mut eigenvalues = Vec::with_capacity(keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i).into_owned();
        let w = l
            .tr_solve_lower_triangular(&v)
            .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
        // wᵀ KHK w = λ vᵀv = λ; rescale so the constraint Gram is I.
        projection.set_column(c, &(w / libm::sqrt(lam)));
        eigenvalues.push(lam);
    }
    Ok(TcaModel { projection, joint, n_source: n_s, kernel, mu, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::mmd_uniform;
    use crate::Rng;

    #[test]
    fn removes_a_pure_shift() {
        let mut rng = Rng::new(31);
        let s = Matrix::from_fn(40, 2, |_, _| rng.normal());
        let t = Matrix::from_fn(40, 2, |_, j| rng.normal() + if j == 0 { 4.0 } else { 0.0 });
        let model = tca_fit(&s, &t, KernelSpec::Linear, 10.0, 1).unwrap();
        let before = mmd_uniform(&s, &t, &KernelSpec::Linear).unwrap();
        let after = mmd_uniform(
            &model.transform_source().unwrap(),
            &model.transform_target().unwrap(),
            &KernelSpec::Linear,
        )
        .unwrap();
        assert!(after < 0.1 * before, "{after} vs {before}");
    }

    #[test]
    fn constraint_and_residuals() {
        let mut rng = Rng::new(2);
        let s = Matrix::from_fn(20, 3, |_, _| rng.normal());
        let t = Matrix::from_fn(20, 3, |_, _| rng.normal() * 1.5 + 0.5);
        let k = KernelSpec::Rbf { sigma: 2.0 };
        let model = tca_fit(&s, &t, k, 1.0, 4).unwrap();
        assert_eq!(model.effective_dim(), 4);
        for r in model.eigen_residuals().unwrap() {
            assert!(r < 1e-6);
        }
        let (_, b) = tca_matrices(&model.joint, 20, &k, 1.0).unwrap();
        let gram = model.projection.transpose() * b * &model.projection;
        assert!((gram - Matrix::identity(4, 4)).norm() < 1e-5);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let s = Matrix::from_fn(6, 2, |i, j| (i * 2 + j) as f64 * 0.1);
        let t = Matrix::from_fn(6, 2, |i, j| (i + j) as f64 * 0.2 - 1.0);
        // Linear kernel on 2-D data: KHK has rank at most 2.
        let model = tca_fit(&s, &t, KernelSpec::Linear, 1.0, 5).unwrap();
        assert!(model.effective_dim() <= 2);
        let fresh = Matrix::from_element(1, 2, 9.0);
        assert!(matches!(model.transform(&fresh), Err(Error::Unsupported(_))));
        assert_eq!(model.transform(&s.rows(1, 2).into_owned()).unwrap().ncols(), model.effective_dim());
    }
}
