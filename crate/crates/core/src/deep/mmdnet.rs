use alloc::vec::Vec;

use super::paired_sgd;
use crate::dataset::LabeledDataset;
use crate::divergence::{mmd_uniform, mmd_with_gradients, KernelSpec};
use crate::error::{check_dim, Result};
use crate::nn::{
    full_batch_loss, rows, soft_cce_grad_logits, soft_cce_loss, FeedForwardNet, HeadKind,
    TrainConfig,
};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MmdNetConfig {
    /// Weight of the latent MMD term.
    pub lambda: f64,
    /// `None` picks an RBF bandwidth by the median heuristic on the latent
    /// features of the untrained net, then keeps it fixed.
    pub kernel: Option<KernelSpec>,
    pub train: TrainConfig,
}

impl Default for MmdNetConfig {
    fn default() -> Self {
        MmdNetConfig { lambda: 1.0, kernel: None, train: TrainConfig::default() }
    }
}

/// Loss `CCE(h(φ(x_s)), y_s) + λ MMD(φ(x_s), φ(x_t))` on one batch pair and
/// its parameter gradient (accumulated into `grad`).
pub fn mmdnet_batch_gradient(
    net: &FeedForwardNet,
    xs: &Matrix,
    ys: &Matrix,
    xt: &Matrix,
    lambda: f64,
    kernel: &KernelSpec,
    grad: &mut [f64],
) -> Result<f64> {
    check_dim(xs.nrows(), ys.nrows())?;
    let ts = net.extractor_forward(xs)?;
    let tt = net.extractor_forward(xt)?;
    let p = net.head_probs(ts.latent(), HeadKind::Main)?;
    let scale = 1.0 / xs.nrows() as f64;
    let cce = soft_cce_loss(&p, ys, scale)?;
    let dlogits = soft_cce_grad_logits(&p, ys, scale);
    let dz_cce = net.head_backward(ts.latent(), HeadKind::Main, &dlogits, grad)?;
    let (mmd, gs, gt) = mmd_with_gradients(ts.latent(), tt.latent(), kernel)?;
    net.extractor_backward(&ts, &(dz_cce + gs * lambda), grad);
    net.extractor_backward(&tt, &(gt * lambda), grad);
    Ok(cce + lambda * mmd)
}

/// Train on labeled source and unlabeled target features. Returns the
/// full-batch loss curve.
pub fn mmdnet_fit(
    net: &mut FeedForwardNet,
    source: &LabeledDataset,
    target: &Matrix,
    cfg: &MmdNetConfig,
) -> Result<Vec<f64>> {
    check_dim(source.dim(), target.ncols())?;
    let kernel = match cfg.kernel {
        Some(k) => k,
        None => KernelSpec::rbf_median(&net.features(source.features())?, &net.features(target)?)?,
    };
    let y = source.one_hot();
    let step = |net: &FeedForwardNet, sb: &[usize], tb: &[usize], grad: &mut [f64]| {
        let xs = rows(source.features(), sb);
        let ys = rows(&y, sb);
        let xt = rows(target, tb);
        mmdnet_batch_gradient(net, &xs, &ys, &xt, cfg.lambda, &kernel, grad).map(|_| ())
    };
    let full = |net: &FeedForwardNet| -> Result<f64> {
        let cce = full_batch_loss(net, source.features(), &y, HeadKind::Main)?;
        let mmd = mmd_uniform(&net.features(source.features())?, &net.features(target)?, &kernel)?;
        Ok(cce + cfg.lambda * mmd)
    };
    paired_sgd(net, source.len(), target.nrows(), &cfg.train, step, full)
}
