//! Entropic OT in the log domain.
//!
//! Dual potentials `f, g` are updated with log-sum-exp so that tiny `ε`
//! never underflows. The regularization is annealed geometrically from the
//! cost scale down to the requested `ε` (warm-started potentials), which
//! keeps iteration counts manageable for `ε ≪ max C`. The returned plan is
//! rounded onto the exact marginals.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::cost::CostMatrix;
use super::plan::TransportPlan;
use crate::dataset::validate_weights;
use crate::error::{check_dim, Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop when the L1 row-marginal residual falls below this.
    pub tol: f64,
}

impl SinkhornConfig {
    /// Defaults: `ε = 0.05 · mean(C)`, 1000 iterations, tol `1e-6`.
    pub fn for_cost(cost: &CostMatrix, epsilon: Option<f64>) -> Self {
        let eps = epsilon.unwrap_or_else(|| {
            let m = cost.mean();
            if m > 0.0 {
                0.05 * m
            } else {
                1e-3
            }
        });
        SinkhornConfig { epsilon: eps, max_iter: 1000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// L1 row-marginal residual of the iterate before the final rounding
    /// onto the marginals.
    pub residual: f64,
    pub converged: bool,
}

fn log_sum_exp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = vals.map(|v| libm::exp(v - max)).sum();
    max + libm::log(s)
}

struct State<'a> {
    c: &'a Matrix,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl State<'_> {
    fn sweep(&mut self, eps: f64) {
        let (m, n) = (self.c.nrows(), self.c.ncols());
        for i in 0..m {
            if self.log_a[i] == f64::NEG_INFINITY {
                self.f[i] = f64::NEG_INFINITY;
                continue;
            }
            let lse = log_sum_exp((0..n).map(|j| (self.g[j] - self.c[(i, j)]) / eps));
            self.f[i] = eps * (self.log_a[i] - lse);
        }
        for j in 0..n {
            if self.log_b[j] == f64::NEG_INFINITY {
                self.g[j] = f64::NEG_INFINITY;
                continue;
            }
            let lse = log_sum_exp((0..m).map(|i| (self.f[i] - self.c[(i, j)]) / eps));
            self.g[j] = eps * (self.log_b[j] - lse);
        }
    }

    fn plan(&self, eps: f64) -> Matrix {
        Matrix::from_fn(self.c.nrows(), self.c.ncols(), |i, j| {
            let v = (self.f[i] + self.g[j] - self.c[(i, j)]) / eps;
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                libm::exp(v)
            }
        })
    }

    fn residual(&self, eps: f64, a: &[f64]) -> f64 {
        let p = self.plan(eps);
        (0..p.nrows()).map(|i| (p.row(i).sum() - a[i]).abs()).sum()
    }
}

/// Entropic-regularized plan. Reports whether `tol` was reached within
/// `max_iter` sweeps at the final `ε`.
/// Scale rows then columns down to their marginals and spread the missing
/// mass as a rank-one correction. The result is feasible, and its cost moves
/// by at most `max C` times the marginal error of the input.
fn round_to_marginals(mut p: Matrix, a: &[f64], b: &[f64]) -> Matrix {
    for (i, &ai) in a.iter().enumerate() {
        let r = p.row(i).sum();
        if r > ai {
            p.row_mut(i).scale_mut(ai / r);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        let c = p.column(j).sum();
        if c > bj {
            p.column_mut(j).scale_mut(bj / c);
        }
    }
    let er: Vec<f64> = a.iter().enumerate().map(|(i, ai)| (ai - p.row(i).sum()).max(0.0)).collect();
    let ec: Vec<f64> = b.iter().enumerate().map(|(j, bj)| (bj - p.column(j).sum()).max(0.0)).collect();
    let total: f64 = ec.iter().sum();
    if total > 0.0 {
        for (i, ri) in er.iter().enumerate() {
            for (j, cj) in ec.iter().enumerate() {
                p[(i, j)] += ri * cj / total;
            }
        }
    }
    p
}

pub fn solve_ot_sinkhorn(
    row_w: &[f64],
    col_w: &[f64],
    cost: &CostMatrix,
    cfg: &SinkhornConfig,
) -> Result<SinkhornSolution> {
    check_dim(row_w.len(), cost.nrows())?;
    check_dim(col_w.len(), cost.ncols())?;
    validate_weights(row_w, "row marginal")?;
    validate_weights(col_w, "column marginal")?;
    if !(cfg.epsilon > 0.0) || !cfg.epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let ln = |w: &f64| if *w > 0.0 { libm::log(*w) } else { f64::NEG_INFINITY };
    let mut st = State {
        c: cost.values(),
        log_a: row_w.iter().map(ln).collect(),
        log_b: col_w.iter().map(ln).collect(),
        f: vec![0.0; row_w.len()],
        g: vec![0.0; col_w.len()],
    };

    // Annealing stages: cost scale -> epsilon, halving, a few sweeps each.
    let mut eps = cost.max().max(cfg.epsilon);
    while eps > cfg.epsilon {
        for _ in 0..20 {
            st.sweep(eps);
        }
        eps = (eps * 0.5).max(cfg.epsilon);
        if eps == cfg.epsilon {
            break;
        }
    }
    let eps = cfg.epsilon;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < cfg.max_iter {
        st.sweep(eps);
        iterations += 1;
        if iterations % 5 == 0 || iterations == cfg.max_iter {
            residual = st.residual(eps, row_w);
            if residual < cfg.tol {
                break;
            }
        }
    }
    if residual.is_nan() {
        return Err(Error::NonFinite("sinkhorn potentials".into()));
    }
    let plan = round_to_marginals(st.plan(eps), row_w, col_w);
    Ok(SinkhornSolution {
        plan: TransportPlan::from_parts(plan, row_w.to_vec(), col_w.to_vec()),
        iterations,
        residual,
        converged: residual < cfg.tol,
    })
}
