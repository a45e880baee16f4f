//! Distribution divergences: kernel MMD and the H-distance.

use alloc::format;
use core::cmp::Ordering;
use alloc::vec::Vec;

use crate::dataset::EmpiricalDistribution;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_distances, Standardizer};
use crate::{Matrix, Rng};

/// Positive-definite kernel on feature vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum KernelSpec {
    Linear,
    /// `exp(-‖x - y‖² / (2σ²))`.
    Rbf { sigma: f64 },
    /// `(⟨x, y⟩ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0) || !sigma.is_finite() => {
                Err(Error::invalid(format!("rbf bandwidth must be positive, got {sigma}")))
            }
            KernelSpec::Polynomial { degree: 0, .. } => {
                Err(Error::invalid("polynomial kernel degree must be at least 1"))
            }
            KernelSpec::Polynomial { offset, .. } if !(offset >= 0.0) => {
                Err(Error::invalid("polynomial kernel offset must be >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// RBF kernel with the median pairwise distance of the pooled rows as
    /// bandwidth (1 when every pair coincides).
    pub fn rbf_median(x: &Matrix, y: &Matrix) -> Result<KernelSpec> {
        check_dim(x.ncols(), y.ncols())?;
        let pooled = Matrix::from_fn(x.nrows() + y.nrows(), x.ncols(), |i, j| {
            if i < x.nrows() {
                x[(i, j)]
            } else {
                y[(i - x.nrows(), j)]
            }
        });
        let d2 = sq_distances(&pooled, &pooled)?;
        let n = pooled.nrows();
        let mut dists: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                dists.push(libm::sqrt(d2[(i, j)]));
            }
        }
        let sigma = if dists.is_empty() {
            1.0
        } else {
            dists.sort_unstable_by(f64::total_cmp);
            let m = dists.len();
            let med = if m % 2 == 1 { dists[m / 2] } else { 0.5 * (dists[m / 2 - 1] + dists[m / 2]) };
            if med > 0.0 {
                med
            } else {
                1.0
            }
        };
        Ok(KernelSpec::Rbf { sigma })
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                libm::exp(-d2 / (2.0 * sigma * sigma))
            }
            KernelSpec::Polynomial { degree, offset } => libm::pow(dot(a, b) + offset, degree as f64),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn rows(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

/// Gram matrix `K_ij = k(x_i, y_j)`.
pub fn kernel_matrix(x: &Matrix, y: &Matrix, k: &KernelSpec) -> Result<Matrix> {
    k.validate()?;
    check_dim(x.ncols(), y.ncols())?;
    let (rx, ry) = (rows(x), rows(y));
    Ok(Matrix::from_fn(x.nrows(), y.nrows(), |i, j| k.eval(&rx[i], &ry[j])))
}

/// Layout of the source/target cross blocks of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CrossBlock {
    /// `L = e eᵀ` with `e = [w_S; -w_T]`: the biased MMD² estimator.
    #[default]
    Standard,
    /// Identity blocks: `I/n_S²`, `I/n_T²` on the diagonal and
    /// `-2 I_{n_S,n_T}/(n_S n_T)` off it. Only couples paired indices, so it
    /// is not a divergence in general.
    Literal,
}

/// Joint Gram matrix `K` over `[source; target]` and the weighting `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointKernelMatrices {
    pub k: Matrix,
    pub l: Matrix,
    pub n_s: usize,
    pub n_t: usize,
}

impl JointKernelMatrices {
    pub fn new(
        p: &EmpiricalDistribution,
        q: &EmpiricalDistribution,
        kernel: &KernelSpec,
        cross: CrossBlock,
    ) -> Result<Self> {
        check_dim(p.dim(), q.dim())?;
        let (n_s, n_t) = (p.len(), q.len());
        let n = n_s + n_t;
        let joint = Matrix::from_fn(n, p.dim(), |i, j| {
            if i < n_s {
                p.support()[(i, j)]
            } else {
                q.support()[(i - n_s, j)]
            }
        });
        let k = kernel_matrix(&joint, &joint, kernel)?;
        let l = match cross {
            CrossBlock::Standard => {
                let e: Vec<f64> = p
                    .weights()
                    .iter()
                    .copied()
                    .chain(q.weights().iter().map(|w| -w))
                    .collect();
                Matrix::from_fn(n, n, |i, j| e[i] * e[j])
            }
            CrossBlock::Literal => {
                let (s, t) = (n_s as f64, n_t as f64);
                Matrix::from_fn(n, n, |i, j| match (i < n_s, j < n_s) {
                    (true, true) if i == j => 1.0 / (s * s),
                    (false, false) if i == j => 1.0 / (t * t),
                    (true, false) if j - n_s == i => -2.0 / (s * t),
                    (false, true) if i - n_s == j => -2.0 / (s * t),
                    _ => 0.0,
                })
            }
        };
        Ok(JointKernelMatrices { k, l, n_s, n_t })
    }

    /// `Tr(K L)`.
    pub fn trace_kl(&self) -> f64 {
        let n = self.k.nrows();
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += self.k[(i, j)] * self.l[(j, i)];
            }
        }
        t
    }
}

/// `MMD(P, Q) = Tr(K L)` with the standard cross block. Round-off below zero
/// is clamped to 0.
pub fn mmd(p: &EmpiricalDistribution, q: &EmpiricalDistribution, k: &KernelSpec) -> Result<f64> {
    mmd_with(p, q, k, CrossBlock::Standard)
}

pub fn mmd_with(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    k: &KernelSpec,
    cross: CrossBlock,
) -> Result<f64> {
    // Evaluate in a canonical argument order so that swapping P and Q gives
    // the bitwise same value, not just the same value up to round-off.
    let (p, q) = if canonical_order(p, q) == Ordering::Greater { (q, p) } else { (p, q) };
    let v = JointKernelMatrices::new(p, q, k, cross)?.trace_kl();
    if cross == CrossBlock::Standard && v < 0.0 {
        if v < -1e-9 {
            log::warn!("mmd: negative trace {v:e} clamped to 0");
        } else {
            log::debug!("mmd: round-off {v:e} clamped to 0");
        }
        return Ok(0.0);
    }
    Ok(v)
}

fn canonical_order(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Ordering {
    let key = |d: &EmpiricalDistribution| (d.len(), d.dim());
    key(p).cmp(&key(q)).then_with(|| {
        let a = p.weights().iter().chain(p.support().iter());
        let b = q.weights().iter().chain(q.support().iter());
        a.zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

/// MMD between two uniformly weighted samples.
pub fn mmd_uniform(x: &Matrix, y: &Matrix, k: &KernelSpec) -> Result<f64> {
    mmd(&EmpiricalDistribution::uniform(x.clone())?, &EmpiricalDistribution::uniform(y.clone())?, k)
}

impl KernelSpec {
    /// `∇_x k(x, y)`.
    pub fn grad_first(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match *self {
            KernelSpec::Linear => y.to_vec(),
            KernelSpec::Rbf { sigma } => {
                let k = self.eval(x, y);
                let s2 = sigma * sigma;
                x.iter().zip(y).map(|(a, b)| -k * (a - b) / s2).collect()
            }
            KernelSpec::Polynomial { degree, offset } => {
                let c = degree as f64 * libm::pow(dot(x, y) + offset, degree as f64 - 1.0);
                y.iter().map(|b| c * b).collect()
            }
        }
    }
}

/// Uniform-weight MMD between two samples together with its gradient with
/// respect to every row of each sample.
pub fn mmd_with_gradients(zs: &Matrix, zt: &Matrix, k: &KernelSpec) -> Result<(f64, Matrix, Matrix)> {
    k.validate()?;
    check_dim(zs.ncols(), zt.ncols())?;
    let (ns, nt) = (zs.nrows(), zt.nrows());
    if ns == 0 || nt == 0 {
        return Err(Error::invalid("mmd of an empty sample"));
    }
    let all: Vec<Vec<f64>> = rows(zs).into_iter().chain(rows(zt)).collect();
    let e: Vec<f64> = (0..ns + nt)
        .map(|i| if i < ns { 1.0 / ns as f64 } else { -1.0 / nt as f64 })
        .collect();
    let d = zs.ncols();
    let mut value = 0.0;
    let mut grad = Matrix::zeros(ns + nt, d);
    for a in 0..ns + nt {
        for b in 0..ns + nt {
            value += e[a] * e[b] * k.eval(&all[a], &all[b]);
            let g = k.grad_first(&all[a], &all[b]);
            for c in 0..d {
                grad[(a, c)] += 2.0 * e[a] * e[b] * g[c];
            }
        }
    }
    let gs = grad.rows(0, ns).into_owned();
    let gt = grad.rows(ns, nt).into_owned();
    Ok((value, gs, gt))
}

/// Logistic-regression domain classifier used by [`h_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DomainClassifierConfig {
    /// Fraction of each domain held out for evaluation.
    pub holdout: f64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for DomainClassifierConfig {
    fn default() -> Self {
        DomainClassifierConfig { holdout: 0.5, steps: 500, lr: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HDistance {
    /// `2 (1 - mean BCE)` on the holdout split.
    pub literal: f64,
    /// `2 (1 - 2 ε̂)` with holdout 0-1 error `ε̂`, clamped to `[0, 2]`.
    pub proxy_a: f64,
    pub holdout_error: f64,
    pub holdout_bce: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn split_domain(n: usize, holdout: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid("h-distance needs at least two samples per domain"));
    }
    let n_hold = (libm::round(n as f64 * holdout) as usize).clamp(1, n - 1);
    let perm = rng.permutation(n);
    Ok((perm[n_hold..].to_vec(), perm[..n_hold].to_vec()))
}

/// Train a logistic domain classifier (source = 0, target = 1) and report
/// both forms of the H-distance on its holdout split.
pub fn h_distance(
    p: &Matrix,
    q: &Matrix,
    cfg: &DomainClassifierConfig,
    rng: &mut Rng,
) -> Result<HDistance> {
    check_dim(p.ncols(), q.ncols())?;
    if !(cfg.holdout > 0.0 && cfg.holdout < 1.0) {
        return Err(Error::invalid("holdout fraction must lie in (0, 1)"));
    }
    let (ps_train, ps_hold) = split_domain(p.nrows(), cfg.holdout, rng)?;
    let (qs_train, qs_hold) = split_domain(q.nrows(), cfg.holdout, rng)?;
    let gather = |a: &[usize], b: &[usize]| {
        let x = Matrix::from_fn(a.len() + b.len(), p.ncols(), |i, j| {
            if i < a.len() {
                p[(a[i], j)]
            } else {
                q[(b[i - a.len()], j)]
            }
        });
        let d: Vec<f64> = (0..a.len() + b.len()).map(|i| if i < a.len() { 0.0 } else { 1.0 }).collect();
        (x, d)
    };
    let (x_train, d_train) = gather(&ps_train, &qs_train);
    let (x_hold, d_hold) = gather(&ps_hold, &qs_hold);
    let scaler = Standardizer::fit(&x_train);
    let (x_train, x_hold) = (scaler.apply(&x_train), scaler.apply(&x_hold));

    let (n, dim) = (x_train.nrows(), x_train.ncols());
    let mut w = alloc::vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..cfg.steps {
        let mut gw = alloc::vec![0.0; dim];
        let mut gb = 0.0;
        for i in 0..n {
            let z = b + (0..dim).map(|k| w[k] * x_train[(i, k)]).sum::<f64>();
            let r = sigmoid(z) - d_train[i];
            gb += r;
            for k in 0..dim {
                gw[k] += r * x_train[(i, k)];
            }
        }
        b -= cfg.lr * gb / n as f64;
        for k in 0..dim {
            w[k] -= cfg.lr * gw[k] / n as f64;
        }
    }

    let m = x_hold.nrows();
    let (mut bce, mut errors) = (0.0, 0usize);
    for i in 0..m {
        let z = b + (0..dim).map(|k| w[k] * x_hold[(i, k)]).sum::<f64>();
        let s = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
        bce -= if d_hold[i] > 0.5 { libm::log(s) } else { libm::log(1.0 - s) };
        if (s >= 0.5) != (d_hold[i] > 0.5) {
            errors += 1;
        }
    }
    let holdout_bce = bce / m as f64;
    let holdout_error = errors as f64 / m as f64;
    Ok(HDistance {
        literal: 2.0 * (1.0 - holdout_bce),
        proxy_a: (2.0 * (1.0 - 2.0 * holdout_error)).clamp(0.0, 2.0),
        holdout_error,
        holdout_bce,
    })
}
