//! Free-support Wasserstein barycenter of labeled empirical distributions.
//!
//! Support points `(x_i, y_i)` of the barycenter carry uniform mass. Each
//! iteration solves one OT problem per input under the label-augmented
//! cost and moves every support point to `Σ_ℓ α_ℓ T_γℓ(x_i)` (likewise for
//! its label row). Both cost terms are quadratic, so that move is the exact
//! minimizer for fixed plans and the objective never increases when the
//! plans are optimal.

use alloc::vec;
use alloc::vec::Vec;

use super::cost::{soft_labeled_cost, LabelCost};
use super::{barycentric_map, solve_plan, OtSolver, TransportPlan};
use crate::dataset::{argmax_rows, SimplexWeights, SoftLabeled};
use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BarycenterConfig {
    /// Weight of the label term in the ground cost.
    pub beta: f64,
    pub label_cost: LabelCost,
    /// Number of barycenter support points `n_B`.
    pub support_size: usize,
    pub max_iter: usize,
    /// Stop once no support coordinate moves by more than this.
    pub tol: f64,
    pub solver: OtSolver,
}

impl Default for BarycenterConfig {
    fn default() -> Self {
        BarycenterConfig {
            beta: 1.0,
            label_cost: LabelCost::Indicator,
            support_size: 100,
            max_iter: 50,
            tol: 1e-6,
            solver: OtSolver::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Barycenter {
    pub support: SoftLabeled,
    /// `Σ_ℓ α_ℓ ⟨γ_ℓ, C_ℓ⟩` evaluated at the support of each iterate; the last
    /// entry belongs to the returned support.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Barycenter {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }
}

fn check_inputs(dists: &[SoftLabeled], alpha: &SimplexWeights) -> Result<(usize, usize)> {
    let first = dists.first().ok_or_else(|| Error::invalid("barycenter of an empty list"))?;
    check_dim(dists.len(), alpha.len())?;
    let (d, nc) = (first.dim(), first.class_count());
    for p in dists {
        check_dim(d, p.dim())?;
        check_dim(nc, p.class_count())?;
        if p.is_empty() {
            return Err(Error::invalid("barycenter input with no support"));
        }
    }
    Ok((d, nc))
}

/// Class-balanced random subsample of the pooled input supports: about
/// `n_B / n_c` points per class (by argmax label), topped up from the rest
/// of the pool when a class runs short. Labels are copied from the chosen
/// points.
pub fn initial_support(dists: &[SoftLabeled], n_b: usize, rng: &mut Rng) -> Result<SoftLabeled> {
    let first = dists.first().ok_or_else(|| Error::invalid("barycenter of an empty list"))?;
    let (d, nc) = (first.dim(), first.class_count());
    if n_b == 0 {
        return Err(Error::invalid("barycenter support size must be positive"));
    }
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (l, p) in dists.iter().enumerate() {
        check_dim(d, p.dim())?;
        check_dim(nc, p.class_count())?;
        pool.extend((0..p.len()).map(|i| (l, i)));
    }
    if n_b > pool.len() {
        return Err(Error::invalid("barycenter support larger than the pooled inputs"));
    }
    rng.shuffle(&mut pool);
    let class_of = |&(l, i): &(usize, usize)| argmax_rows(&dists[l].labels.rows(i, 1).into_owned())[0];
    let mut quota: Vec<usize> = (0..nc).map(|c| n_b / nc + usize::from(c < n_b % nc)).collect();
    let mut taken = vec![false; pool.len()];
    let mut chosen = Vec::with_capacity(n_b);
    for (k, item) in pool.iter().enumerate() {
        let c = class_of(item);
        if quota[c] > 0 {
            quota[c] -= 1;
            taken[k] = true;
            chosen.push(*item);
        }
    }
    for (k, item) in pool.iter().enumerate() {
        if chosen.len() == n_b {
            break;
        }
        if !taken[k] {
            chosen.push(*item);
        }
    }
    let x = Matrix::from_fn(n_b, d, |r, c| {
        let (l, i) = chosen[r];
        dists[l].features[(i, c)]
    });
    let y = Matrix::from_fn(n_b, nc, |r, c| {
        let (l, i) = chosen[r];
        dists[l].labels[(i, c)]
    });
    SoftLabeled::uniform(x, y)
}

/// Barycenter with a freshly sampled initial support.
pub fn free_support_barycenter(
    dists: &[SoftLabeled],
    alpha: &SimplexWeights,
    cfg: &BarycenterConfig,
    rng: &mut Rng,
) -> Result<Barycenter> {
    check_inputs(dists, alpha)?;
    let init = initial_support(dists, cfg.support_size, rng)?;
    barycenter_from(dists, alpha, init, cfg)
}

/// Plans from `support` to every input with nonzero weight (`None` for the
/// others) and the weighted transport objective.
pub(crate) fn plans_to(
    support: &SoftLabeled,
    dists: &[SoftLabeled],
    alpha: &SimplexWeights,
    cfg: &BarycenterConfig,
) -> Result<(Vec<Option<TransportPlan>>, f64)> {
    let mut plans = Vec::with_capacity(dists.len());
    let mut objective = 0.0;
    for (p, &a) in dists.iter().zip(alpha.values()) {
        if a == 0.0 {
            plans.push(None);
            continue;
        }
        let cost = soft_labeled_cost(
            &support.features,
            &support.labels,
            &p.features,
            &p.labels,
            cfg.beta,
            cfg.label_cost,
        )?;
        let plan = solve_plan(&support.weights, &p.weights, &cost, cfg.solver)?;
        objective += a * plan.cost(&cost);
        plans.push(Some(plan));
    }
    Ok((plans, objective))
}

/// `Σ_ℓ α_ℓ T_γℓ(·)` applied to features and label rows. Summation runs in
/// input order, so the result does not depend on how plans were produced.
pub(crate) fn fixed_point_step(
    plans: &[Option<TransportPlan>],
    dists: &[SoftLabeled],
    alpha: &SimplexWeights,
    n_b: usize,
) -> Result<(Matrix, Matrix)> {
    let (d, nc) = (dists[0].dim(), dists[0].class_count());
    let mut x = Matrix::zeros(n_b, d);
    let mut y = Matrix::zeros(n_b, nc);
    for ((plan, p), &a) in plans.iter().zip(dists).zip(alpha.values()) {
        if let Some(plan) = plan {
            x += barycentric_map(plan, &p.features)? * a;
            y += barycentric_map(plan, &p.labels)? * a;
        }
    }
    Ok((x, y))
}

fn max_abs_change(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()))
}

/// Fixed-point iteration from a given support (warm start).
pub fn barycenter_from(
    dists: &[SoftLabeled],
    alpha: &SimplexWeights,
    init: SoftLabeled,
    cfg: &BarycenterConfig,
) -> Result<Barycenter> {
    let (d, nc) = check_inputs(dists, alpha)?;
    check_dim(d, init.dim())?;
    check_dim(nc, init.class_count())?;
    let n_b = init.len();
    let mut support = init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (plans, objective) = plans_to(&support, dists, alpha, cfg)?;
        if !objective.is_finite() {
            return Err(Error::NonFinite("barycenter objective".into()));
        }
        trace.push(objective);
        if converged || iterations == cfg.max_iter {
            break;
        }
        let (x, y) = fixed_point_step(&plans, dists, alpha, n_b)?;
        let moved = max_abs_change(&x, &support.features).max(max_abs_change(&y, &support.labels));
        support.features = x;
        support.labels = y;
        iterations += 1;
        converged = moved <= cfg.tol;
    }
    log::debug!("barycenter: {iterations} iterations, objective {}", trace[trace.len() - 1]);
    Ok(Barycenter { support, objective_trace: trace, iterations, converged })
}
