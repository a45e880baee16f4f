use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::loss::{soft_cce_grad_logits, soft_cce_loss};
use super::net::{FeedForwardNet, HeadKind};
use crate::dataset::{argmax_rows, LabeledDataset};
use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Rng};

/// Plain minibatch SGD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.05, batch_size: 64, epochs: 300, weight_decay: 1e-4, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be >= 0"));
        }
        Ok(())
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

/// One shuffled pass over `0..n` cut into batches of at most `batch`.
pub fn epoch_batches(n: usize, batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    rng.permutation(n).chunks(batch.max(1)).map(|c| c.to_vec()).collect()
}

/// `θ ← θ - lr (g + wd θ)`.
pub fn sgd_update(params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * (g + weight_decay * *p);
    }
}

pub(crate) fn rows(x: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Mean cross-entropy of `head` over all rows against (possibly soft)
/// targets.
pub fn full_batch_loss(
    net: &FeedForwardNet,
    x: &Matrix,
    targets: &Matrix,
    head: HeadKind,
) -> Result<f64> {
    let p = net.forward(x, head)?;
    soft_cce_loss(&p, targets, 1.0 / x.nrows().max(1) as f64)
}

/// Accumulate the gradient of `scale · CCE(head(φ(x)), t)` into `grad` and
/// return the loss value.
pub(crate) fn cce_gradient(
    net: &FeedForwardNet,
    x: &Matrix,
    targets: &Matrix,
    head: HeadKind,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let tape = net.extractor_forward(x)?;
    let p = net.head_probs(tape.latent(), head)?;
    let loss = soft_cce_loss(&p, targets, scale)?;
    let dlogits = soft_cce_grad_logits(&p, targets, scale);
    let dz = net.head_backward(tape.latent(), head, &dlogits, grad)?;
    net.extractor_backward(&tape, &dz, grad);
    Ok(loss)
}

pub(crate) fn check_finite(loss: f64, what: &str, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} loss at epoch {epoch}")))
    }
}

/// Minimize the mean cross-entropy of `head` against per-row targets. The
/// returned curve holds the full-batch loss before training and after every
/// epoch. Batches come from stream 0 of `cfg.seed`.
pub fn train_soft(
    net: &mut FeedForwardNet,
    x: &Matrix,
    targets: &Matrix,
    head: HeadKind,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(x.nrows(), targets.nrows())?;
    if x.nrows() == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    let mut rng = Rng::with_stream(cfg.seed, 0);
    let mut curve = vec![full_batch_loss(net, x, targets, head)?];
    check_finite(curve[0], "initial", 0)?;
    let mut grad = vec![0.0; net.param_count()];
    for epoch in 1..=cfg.epochs {
        for batch in epoch_batches(x.nrows(), cfg.batch_size, &mut rng) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let xb = rows(x, &batch);
            let tb = rows(targets, &batch);
            cce_gradient(net, &xb, &tb, head, 1.0 / batch.len() as f64, &mut grad)?;
            sgd_update(net.params_mut(), &grad, cfg.lr, cfg.weight_decay);
        }
        let loss = full_batch_loss(net, x, targets, head)?;
        check_finite(loss, "training", epoch)?;
        curve.push(loss);
    }
    Ok(curve)
}

/// Empirical risk minimization of the main head on a labeled dataset.
pub fn train_erm(net: &mut FeedForwardNet, ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    train_soft(net, ds.features(), &ds.one_hot(), HeadKind::Main, cfg)
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy_from_probs(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_dim(probs.nrows(), labels.len())?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = argmax_rows(probs).iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn accuracy(net: &FeedForwardNet, ds: &LabeledDataset, head: HeadKind) -> Result<f64> {
    accuracy_from_probs(&net.forward(ds.features(), head)?, ds.labels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DomainId;
    use crate::nn::Architecture;

    fn blobs(n: usize, sep: f64, rng: &mut Rng) -> LabeledDataset {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Matrix::from_fn(n, 2, |i, _| rng.normal() * 0.5 + sep * (labels[i] as f64 - 0.5));
        LabeledDataset::new(x, labels, 2, DomainId(0)).unwrap()
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let mut rng = Rng::new(2);
        let ds = blobs(100, 6.0, &mut rng);
        let mut net = FeedForwardNet::new(Architecture::classifier(2, &[8], 2), &mut rng).unwrap();
        let cfg = TrainConfig { epochs: 200, ..Default::default() };
        let curve = train_erm(&mut net, &ds, &cfg).unwrap();
        assert_eq!(curve.len(), 201);
        assert!(curve[200] <= curve[0]);
        assert!(accuracy(&net, &ds, HeadKind::Main).unwrap() >= 0.99);
    }

    #[test]
    fn ambiguous_pair_stays_at_half() {
        let x = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let ds = LabeledDataset::new(x, vec![0, 1], 2, DomainId(0)).unwrap();
        let mut net =
            FeedForwardNet::new(Architecture::classifier(1, &[4], 2), &mut Rng::new(0)).unwrap();
        let curve = train_erm(&mut net, &ds, &TrainConfig::default().with_epochs(50)).unwrap();
        assert_eq!(accuracy(&net, &ds, HeadKind::Main).unwrap(), 0.5);
        assert!(curve.iter().all(|l| *l >= core::f64::consts::LN_2 - 1e-6));
    }

    #[test]
    fn single_sample_memorized() {
        let ds = LabeledDataset::new(Matrix::from_element(1, 2, 0.5), vec![1], 3, DomainId(0))
            .unwrap();
        let mut net =
            FeedForwardNet::new(Architecture::classifier(2, &[4], 3), &mut Rng::new(4)).unwrap();
        let cfg = TrainConfig { lr: 0.5, epochs: 300, weight_decay: 0.0, ..Default::default() };
        let curve = train_erm(&mut net, &ds, &cfg).unwrap();
        assert!(*curve.last().unwrap() < 1e-2);
    }

    #[test]
    fn accuracy_loop_oracle() {
        let mut rng = Rng::new(9);
        let p = Matrix::from_fn(30, 4, |_, _| rng.uniform());
        let labels: Vec<usize> = (0..30).map(|_| rng.below(4)).collect();
        let mut hits = 0;
        for i in 0..30 {
            let mut best = 0;
            for c in 1..4 {
                if p[(i, c)] > p[(i, best)] {
                    best = c;
                }
            }
            hits += usize::from(best == labels[i]);
        }
        assert_eq!(accuracy_from_probs(&p, &labels).unwrap(), hits as f64 / 30.0);
    }
}
