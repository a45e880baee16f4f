//! Deep adapters on the [`crate::nn`] substrate: MMD-net, DANN, DeepJDOT
//! and M3SDA.
//!
//! Every method exposes its per-batch loss and gradient as a function so the
//! hand-derived gradients can be probed with finite differences.

mod dann;
mod deepjdot;
mod m3sda;
mod mmdnet;

pub use dann::{dann_batch_gradient, dann_fit, DannConfig, DannFit};
pub use deepjdot::{deepjdot_batch_gradient, deepjdot_fit, DeepJdotConfig};
pub use m3sda::{
    m3sda_architecture, m3sda_batch_gradient, m3sda_discrepancy_gradient, m3sda_fit,
    m3sda_predict, moment_penalties, M3sdaConfig, M3sdaFit, PairNorm,
};
pub use mmdnet::{mmdnet_batch_gradient, mmdnet_fit, MmdNetConfig};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{check_finite, epoch_batches, sgd_update, FeedForwardNet, TrainConfig};
use crate::Rng;

/// Endless stream of indices `0..n`: a fresh shuffle every pass.
pub(crate) struct CyclingSampler {
    rng: Rng,
    perm: Vec<usize>,
    pos: usize,
}

impl CyclingSampler {
    pub(crate) fn new(n: usize, rng: Rng) -> Self {
        CyclingSampler { rng, perm: (0..n).collect(), pos: n }
    }

    pub(crate) fn take(&mut self, k: usize) -> Vec<usize> {
        let n = self.perm.len();
        let mut out = Vec::with_capacity(k);
        while out.len() < k.min(n) {
            if self.pos == n {
                self.rng.shuffle(&mut self.perm);
                self.pos = 0;
            }
            out.push(self.perm[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// SGD over source minibatches (stream 0 of the seed, exactly as plain ERM)
/// paired with equally sized target batches (stream 1). `step` accumulates
/// the batch gradient; `full_loss` is recorded before training and after
/// each epoch.
pub(crate) fn paired_sgd<S, L>(
    net: &mut FeedForwardNet,
    n_src: usize,
    n_tgt: usize,
    cfg: &TrainConfig,
    mut step: S,
    mut full_loss: L,
) -> Result<Vec<f64>>
where
    S: FnMut(&FeedForwardNet, &[usize], &[usize], &mut [f64]) -> Result<()>,
    L: FnMut(&FeedForwardNet) -> Result<f64>,
{
    cfg.validate()?;
    if n_src == 0 || n_tgt == 0 {
        return Err(Error::invalid("deep adaptation needs nonempty source and target"));
    }
    let mut src_rng = Rng::with_stream(cfg.seed, 0);
    let mut tgt = CyclingSampler::new(n_tgt, Rng::with_stream(cfg.seed, 1));
    let mut curve = vec![full_loss(net)?];
    check_finite(curve[0], "initial", 0)?;
    let mut grad = vec![0.0; net.param_count()];
    for epoch in 1..=cfg.epochs {
        for batch in epoch_batches(n_src, cfg.batch_size, &mut src_rng) {
            let tb = tgt.take(batch.len());
            grad.iter_mut().for_each(|g| *g = 0.0);
            step(net, &batch, &tb, &mut grad)?;
            sgd_update(net.params_mut(), &grad, cfg.lr, cfg.weight_decay);
        }
        let loss = full_loss(net)?;
        check_finite(loss, "training", epoch)?;
        curve.push(loss);
    }
    Ok(curve)
}
