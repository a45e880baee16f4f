use alloc::vec;
use alloc::vec::Vec;

use super::paired_sgd;
use crate::dataset::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    full_batch_loss, rows, soft_cce_grad_logits, soft_cce_loss, FeedForwardNet, HeadKind,
    TrainConfig, PROB_FLOOR,
};
use crate::ot::{solve_ot_exact, CostMatrix, GroundCost, TransportPlan};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DeepJdotConfig {
    /// Weight of the batch transport loss.
    pub lambda: f64,
    /// Weight of the latent distance in the ground cost.
    pub alpha: f64,
    /// Weight of the label loss in the ground cost.
    pub beta: f64,
    pub train: TrainConfig,
}

impl Default for DeepJdotConfig {
    fn default() -> Self {
        DeepJdotConfig { lambda: 1.0, alpha: 0.1, beta: 1.0, train: TrainConfig::default() }
    }
}

/// Batch loss `CCE(h(z_s), y_s) + λ Σ_ij γ_ij [α ‖z_i - z_j‖² - β log ŷ_{j, y_i}]`
/// with `γ` the exact plan between the two uniform batches, held constant
/// for differentiation. Returns the loss and the plan.
#[allow(clippy::too_many_arguments)]
pub fn deepjdot_batch_gradient(
    net: &FeedForwardNet,
    xs: &Matrix,
    ys: &Matrix,
    labels: &[usize],
    xt: &Matrix,
    cfg: &DeepJdotConfig,
    grad: &mut [f64],
) -> Result<(f64, TransportPlan)> {
    check_dim(xs.nrows(), ys.nrows())?;
    check_dim(xs.nrows(), labels.len())?;
    if !(cfg.alpha >= 0.0 && cfg.beta >= 0.0 && cfg.lambda >= 0.0) {
        return Err(Error::invalid("DeepJDOT weights must be >= 0"));
    }
    let (ns, nt) = (xs.nrows(), xt.nrows());
    let ts = net.extractor_forward(xs)?;
    let tt = net.extractor_forward(xt)?;
    let (zs, zt) = (ts.latent(), tt.latent());
    let ps = net.head_probs(zs, HeadKind::Main)?;
    let pt = net.head_probs(zt, HeadKind::Main)?;

    let scale = 1.0 / ns as f64;
    let cce = soft_cce_loss(&ps, ys, scale)?;
    let mut dzs = net.head_backward(zs, HeadKind::Main, &soft_cce_grad_logits(&ps, ys, scale), grad)?;

    let d2 = crate::linalg::sq_distances(zs, zt)?;
    let c = Matrix::from_fn(ns, nt, |i, j| {
        cfg.alpha * d2[(i, j)] - cfg.beta * libm::log(pt[(j, labels[i])].clamp(PROB_FLOOR, 1.0))
    });
    let cost = CostMatrix::new(c, GroundCost::Jdot { alpha: cfg.alpha, beta: cfg.beta })?;
    let plan = solve_ot_exact(&vec![1.0 / ns as f64; ns], &vec![1.0 / nt as f64; nt], &cost)?;
    let transport = plan.cost(&cost);
    let g = plan.values();

    let k = 2.0 * cfg.alpha * cfg.lambda;
    let mut dzt = Matrix::zeros(nt, zt.ncols());
    for i in 0..ns {
        for j in 0..nt {
            let w = g[(i, j)];
            if w == 0.0 {
                continue;
            }
            for c in 0..zs.ncols() {
                let diff = zs[(i, c)] - zt[(j, c)];
                dzs[(i, c)] += k * w * diff;
                dzt[(j, c)] -= k * w * diff;
            }
        }
    }
    // ∂/∂logits_j of -Σ_i γ_ij log ŷ_{j,y_i}: m_j ŷ_j - Σ_i γ_ij y_i.
    let carried = g.transpose() * ys;
    let mut dlog_t = Matrix::zeros(nt, pt.ncols());
    for j in 0..nt {
        let m = g.column(j).sum();
        for c in 0..pt.ncols() {
            dlog_t[(j, c)] = cfg.lambda * cfg.beta * (m * pt[(j, c)] - carried[(j, c)]);
        }
    }
    dzt += net.head_backward(zt, HeadKind::Main, &dlog_t, grad)?;
    net.extractor_backward(&ts, &dzs, grad);
    net.extractor_backward(&tt, &dzt, grad);
    Ok((cce + cfg.lambda * transport, plan))
}

/// Minibatch DeepJDOT. The curve records the full-batch source
/// cross-entropy (the transport term only exists per batch).
pub fn deepjdot_fit(
    net: &mut FeedForwardNet,
    source: &LabeledDataset,
    target: &Matrix,
    cfg: &DeepJdotConfig,
) -> Result<Vec<f64>> {
    check_dim(source.dim(), target.ncols())?;
    let y = source.one_hot();
    let step = |net: &FeedForwardNet, sb: &[usize], tb: &[usize], grad: &mut [f64]| {
        let xs = rows(source.features(), sb);
        let ys = rows(&y, sb);
        let labels: Vec<usize> = sb.iter().map(|&i| source.labels()[i]).collect();
        let xt = rows(target, tb);
        deepjdot_batch_gradient(net, &xs, &ys, &labels, &xt, cfg, grad).map(|_| ())
    };
    let full = |net: &FeedForwardNet| full_batch_loss(net, source.features(), &y, HeadKind::Main);
    paired_sgd(net, source.len(), target.nrows(), &cfg.train, step, full)
}
