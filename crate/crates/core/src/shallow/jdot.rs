//! Joint distribution OT: alternate between the optimal coupling of
//! (source features, source labels) with (target features, predictions) and
//! a classifier refit on plan-transported labels.
//!
//! The classifier step is a few SGD epochs, not an exact minimizer, so each
//! candidate is kept only if the re-solved OT objective does not go up;
//! otherwise the step is retried at half the learning rate. This keeps the
//! objective trace monotone.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{DomainId, LabeledDataset, SimplexWeights};
use crate::error::{check_dim, Error, Result};
use crate::linalg::sq_distances;
use crate::nn::{train_erm, train_soft, FeedForwardNet, HeadKind, TrainConfig, PROB_FLOOR};
use crate::ot::{solve_ot_exact_with_duals, CostMatrix, ExactSolution, GroundCost};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct JdotConfig {
    /// Weight of the squared feature distance.
    pub alpha: f64,
    /// Weight of the label loss `-log ŷ_{j, y_i}`.
    pub beta: f64,
    pub outer_iters: usize,
    /// Source-only epochs before the first coupling.
    pub warm_start_epochs: usize,
    /// SGD settings of one classifier step (its `epochs` are per step).
    pub inner: TrainConfig,
    /// Learning-rate halvings tried before a step is rejected.
    pub max_backtracks: usize,
}

impl Default for JdotConfig {
    fn default() -> Self {
        JdotConfig {
            alpha: 1.0,
            beta: 1.0,
            outer_iters: 10,
            warm_start_epochs: 50,
            inner: TrainConfig { epochs: 20, ..TrainConfig::default() },
            max_backtracks: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JdotFit {
    pub net: FeedForwardNet,
    /// OT objective after the warm start and after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Candidate steps discarded because they raised the objective.
    pub rejected_steps: usize,
}

/// `C_ij = α ‖x_i - x_j‖² - β log ŷ_{j, y_i}`.
pub fn jdot_cost(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    probs_t: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<CostMatrix> {
    check_dim(xs.nrows(), ys.len())?;
    check_dim(xt.nrows(), probs_t.nrows())?;
    let d = sq_distances(xs, xt)?;
    cost_from_distances(&d, ys, probs_t, alpha, beta)
}

fn cost_from_distances(
    d: &Matrix,
    ys: &[usize],
    probs_t: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<CostMatrix> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::invalid("JDOT weights must be >= 0"));
    }
    let c = Matrix::from_fn(d.nrows(), d.ncols(), |i, j| {
        alpha * d[(i, j)] + beta * -libm::log(probs_t[(j, ys[i])].clamp(PROB_FLOOR, 1.0))
    });
    CostMatrix::new(c, GroundCost::Jdot { alpha, beta })
}

pub(crate) struct Alternation {
    pub net: FeedForwardNet,
    pub weights: SimplexWeights,
    pub objective_trace: Vec<f64>,
    pub weight_trace: Vec<SimplexWeights>,
    pub rejected_steps: usize,
}

struct Problem<'a> {
    d: Matrix,
    labels: &'a [usize],
    one_hot: Matrix,
    sizes: Vec<usize>,
    target: &'a Matrix,
    cfg: &'a JdotConfig,
}

impl Problem<'_> {
    fn row_weights(&self, w: &SimplexWeights) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.labels.len());
        for (&a, &n) in w.values().iter().zip(&self.sizes) {
            out.extend(core::iter::repeat_n(a / n as f64, n));
        }
        out
    }

    fn solve(&self, w: &SimplexWeights, net: &FeedForwardNet) -> Result<(f64, ExactSolution)> {
        let probs = net.forward(self.target, HeadKind::Main)?;
        let cost = cost_from_distances(&self.d, self.labels, &probs, self.cfg.alpha, self.cfg.beta)?;
        let nt = self.target.nrows();
        let sol = solve_ot_exact_with_duals(&self.row_weights(w), &vec![1.0 / nt as f64; nt], &cost)?;
        Ok((sol.plan.cost(&cost), sol))
    }
}

/// Shared JDOT / WJDOT loop. `weight_step = None` keeps the source weights
/// fixed.
pub(crate) fn alternate(
    sources: &[&LabeledDataset],
    target: &Matrix,
    cfg: &JdotConfig,
    mut net: FeedForwardNet,
    weights: SimplexWeights,
    weight_step: Option<f64>,
) -> Result<Alternation> {
    cfg.inner.validate()?;
    check_dim(sources.len(), weights.len())?;
    if target.nrows() == 0 || sources.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid("JDOT needs nonempty sources and target"));
    }
    let pooled = LabeledDataset::concat(sources, DomainId(0))?;
    check_dim(pooled.dim(), target.ncols())?;
    if cfg.warm_start_epochs > 0 {
        train_erm(&mut net, &pooled, &cfg.inner.with_epochs(cfg.warm_start_epochs))?;
    }
    let problem = Problem {
        d: sq_distances(pooled.features(), target)?,
        labels: pooled.labels(),
        one_hot: pooled.one_hot(),
        sizes: sources.iter().map(|s| s.len()).collect(),
        target,
        cfg,
    };
    let nt = target.nrows() as f64;
    let mut weights = weights;
    let (mut objective, mut sol) = problem.solve(&weights, &net)?;
    let mut trace = vec![objective];
    let mut weight_trace = vec![weights.clone()];
    let mut rejected = 0;

    for it in 0..cfg.outer_iters {
        if cfg.beta > 0.0 {
            // Labels carried to each target point: n_T Σ_i γ_ij y_i.
            let soft = sol.plan.values().transpose() * &problem.one_hot * nt;
            let mut accepted = false;
            for r in 0..=cfg.max_backtracks {
                let mut step = cfg.inner;
                step.lr /= (1u32 << r) as f64;
                step.seed = cfg.inner.seed.wrapping_add(it as u64 + 1);
                let mut cand = net.clone();
                if train_soft(&mut cand, target, &soft, HeadKind::Main, &step).is_err() {
                    rejected += 1;
                    continue;
                }
                let (obj, s) = problem.solve(&weights, &cand)?;
                if obj <= objective {
                    net = cand;
                    objective = obj;
                    sol = s;
                    accepted = true;
                    break;
                }
                rejected += 1;
            }
            if !accepted {
                log::debug!("jdot: classifier step {it} rejected");
            }
        }
        if let Some(eta) = weight_step {
            // ∂W/∂α_k = (1/n_k) Σ_{i ∈ S_k} u_i; constant shifts of the dual
            // do not change the projected step.
            let mut grad = Vec::with_capacity(problem.sizes.len());
            let mut at = 0;
            for &n in &problem.sizes {
                grad.push(sol.row_potential[at..at + n].iter().sum::<f64>() / n as f64);
                at += n;
            }
            let mut eta = eta;
            for _ in 0..=cfg.max_backtracks {
                let moved: Vec<f64> =
                    weights.values().iter().zip(&grad).map(|(a, g)| a - eta * g).collect();
                let cand = SimplexWeights::project(&moved);
                let (obj, s) = problem.solve(&cand, &net)?;
                if obj <= objective {
                    weights = cand;
                    objective = obj;
                    sol = s;
                    break;
                }
                eta *= 0.5;
            }
        }
        trace.push(objective);
        weight_trace.push(weights.clone());
    }
    Ok(Alternation {
        net,
        weights,
        objective_trace: trace,
        weight_trace,
        rejected_steps: rejected,
    })
}

/// Fit a classifier for the target domain by JDOT. `net` must have a main
/// head; it is warm-started on the source.
pub fn jdot_fit(
    source: &LabeledDataset,
    target: &Matrix,
    cfg: &JdotConfig,
    net: FeedForwardNet,
) -> Result<JdotFit> {
    let alt = alternate(&[source], target, cfg, net, SimplexWeights::uniform(1), None)?;
    Ok(JdotFit { net: alt.net, objective_trace: alt.objective_trace, rejected_steps: alt.rejected_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{accuracy_from_probs, Architecture};
    use crate::ot::{cost_matrix, solve_ot_exact};
    use crate::Rng;

    fn blobs(n: usize, shift: f64, rng: &mut Rng) -> LabeledDataset {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Matrix::from_fn(n, 2, |i, j| {
            let c = if labels[i] == 0 { -2.0 } else { 2.0 };
            rng.normal() * 0.6 + if j == 0 { c + shift } else { shift }
        });
        LabeledDataset::new(x, labels, 2, DomainId(0)).unwrap()
    }

    #[test]
    fn beta_zero_gives_feature_plan() {
        let mut rng = Rng::new(3);
        let s = blobs(10, 0.0, &mut rng);
        let t = blobs(12, 1.0, &mut rng);
        let p = Matrix::from_element(12, 2, 0.5);
        let c = jdot_cost(s.features(), s.labels(), t.features(), &p, 1.0, 0.0).unwrap();
        let plain = cost_matrix(s.features(), t.features()).unwrap();
        assert_eq!(c.values(), plain.values());
        let (a, b) = (vec![0.1; 10], vec![1.0 / 12.0; 12]);
        assert_eq!(
            solve_ot_exact(&a, &b, &c).unwrap().values(),
            solve_ot_exact(&a, &b, &plain).unwrap().values()
        );
    }

    #[test]
    fn adapts_translated_blobs() {
        let mut rng = Rng::new(7);
        let s = blobs(60, 0.0, &mut rng);
        let t = blobs(60, 2.5, &mut rng);
        let net = FeedForwardNet::new(Architecture::classifier(2, &[16], 2), &mut rng).unwrap();
        let cfg = JdotConfig { outer_iters: 5, ..Default::default() };
        let fit = jdot_fit(&s, t.features(), &cfg, net).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
        let acc =
            accuracy_from_probs(&fit.net.forward(t.features(), HeadKind::Main).unwrap(), t.labels())
                .unwrap();
        assert!(acc >= 0.95, "{acc}");
    }
}
