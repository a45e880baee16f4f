//! Optimal transport: ground costs, the exact network simplex solver, the
//! log-domain Sinkhorn solver, barycentric maps and free-support
//! Wasserstein barycenters of labeled distributions.

mod barycenter;
mod cost;
mod network_simplex;
mod plan;
mod sinkhorn;

pub(crate) use barycenter::{fixed_point_step, plans_to};
pub use barycenter::{
    barycenter_from, free_support_barycenter, initial_support, Barycenter, BarycenterConfig,
};
pub use cost::{
    cost_matrix, labeled_cost_matrix, soft_labeled_cost, CostMatrix, GroundCost, LabelCost,
};
pub use network_simplex::{solve_ot_exact, solve_ot_exact_with_duals, ExactSolution};
pub use plan::TransportPlan;
pub use sinkhorn::{solve_ot_sinkhorn, SinkhornConfig, SinkhornSolution};

use alloc::vec::Vec;

use crate::dataset::EmpiricalDistribution;
use crate::error::{check_dim, Error, Result};
use crate::Matrix;

/// Largest side for which [`OtSolver::Auto`] uses the exact solver.
pub const AUTO_EXACT_MAX_SIDE: usize = 512;

/// Which solver computes a transport plan.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Default)]
pub enum OtSolver {
    Exact,
    /// Entropic solver; `epsilon = None` picks `0.05 * mean(C)`.
    Sinkhorn { epsilon: Option<f64> },
    /// Exact up to [`AUTO_EXACT_MAX_SIDE`] points per side, Sinkhorn beyond.
    #[default]
    Auto,
}


/// Solve `min ⟨γ, C⟩` over couplings of `row_w` and `col_w`.
pub fn solve_plan(
    row_w: &[f64],
    col_w: &[f64],
    cost: &CostMatrix,
    solver: OtSolver,
) -> Result<TransportPlan> {
    match solver {
        OtSolver::Exact => solve_ot_exact(row_w, col_w, cost),
        OtSolver::Sinkhorn { epsilon } => {
            let cfg = SinkhornConfig::for_cost(cost, epsilon);
            Ok(solve_ot_sinkhorn(row_w, col_w, cost, &cfg)?.plan)
        }
        OtSolver::Auto => {
            if row_w.len().max(col_w.len()) <= AUTO_EXACT_MAX_SIDE {
                solve_ot_exact(row_w, col_w, cost)
            } else {
                let cfg = SinkhornConfig::for_cost(cost, None);
                Ok(solve_ot_sinkhorn(row_w, col_w, cost, &cfg)?.plan)
            }
        }
    }
}

/// `⟨γ*, C⟩` between two empirical distributions under a squared Euclidean
/// ground cost.
pub fn wasserstein_distance(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    solver: OtSolver,
) -> Result<f64> {
    let cost = cost_matrix(p.support(), q.support())?;
    let plan = solve_plan(p.weights(), q.weights(), &cost, solver)?;
    Ok(plan.cost(&cost))
}

/// Barycentric map `T_γ(x_i) = Σ_j γ_ij y_j / Σ_j γ_ij`.
///
/// With a uniform row marginal `1/n_S` this is exactly `n_S γ Y`. A row that
/// sends all its mass to one target copies that target row bit for bit.
pub fn barycentric_map(plan: &TransportPlan, target: &Matrix) -> Result<Matrix> {
    let g = plan.values();
    check_dim(g.ncols(), target.nrows())?;
    let (n, d) = (g.nrows(), target.ncols());
    let mut out = Matrix::zeros(n, d);
    let mut nz: Vec<usize> = Vec::new();
    for i in 0..n {
        nz.clear();
        let mut mass = 0.0;
        for j in 0..g.ncols() {
            let v = g[(i, j)];
            if v != 0.0 {
                nz.push(j);
                mass += v;
            }
        }
        if !(mass > 0.0) {
            return Err(Error::invalid("barycentric map: plan row carries no mass"));
        }
        if nz.len() == 1 {
            out.row_mut(i).copy_from(&target.row(nz[0]));
            continue;
        }
        for &j in &nz {
            let w = g[(i, j)] / mass;
            for k in 0..d {
                out[(i, k)] += w * target[(j, k)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn barycentric_map_examples() {
        let plan = TransportPlan::from_parts(Matrix::from_element(1, 1, 1.0), vec![1.0], vec![1.0]);
        let y = Matrix::from_row_slice(1, 2, &[3.0, -1.0]);
        assert_eq!(barycentric_map(&plan, &y).unwrap(), y);

        let n = 4;
        let g = Matrix::identity(n, n) / n as f64;
        let plan = TransportPlan::from_parts(g, vec![0.25; 4], vec![0.25; 4]);
        let y = Matrix::from_fn(4, 3, |i, j| (i as f64) * 1.7 - j as f64 * 0.3);
        assert_eq!(barycentric_map(&plan, &y).unwrap(), y);
    }

    #[test]
    fn wasserstein_examples() {
        let a = EmpiricalDistribution::uniform(Matrix::from_element(1, 1, 0.0)).unwrap();
        let b = EmpiricalDistribution::uniform(Matrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(wasserstein_distance(&a, &b, OtSolver::Exact).unwrap(), 4.0);
        let x = Matrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64 * 0.37);
        let p = EmpiricalDistribution::uniform(x).unwrap();
        assert!(wasserstein_distance(&p, &p, OtSolver::Exact).unwrap().abs() < 1e-9);
    }
}
