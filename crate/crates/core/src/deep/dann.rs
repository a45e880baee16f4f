use alloc::vec;
use alloc::vec::Vec;

use super::paired_sgd;
use crate::dataset::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    bce_loss, full_batch_loss, rows, soft_cce_grad_logits, soft_cce_loss, FeedForwardNet,
    GradReversal, HeadKind, TrainConfig,
};
use crate::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DannConfig {
    /// Weight of the domain loss.
    pub lambda: f64,
    /// Reversal factor applied to the domain gradient reaching `φ`.
    pub lambda_rev: f64,
    /// Fraction of each domain kept away from the domain head and used to
    /// report its accuracy.
    pub holdout: f64,
    pub train: TrainConfig,
}

impl Default for DannConfig {
    fn default() -> Self {
        DannConfig { lambda: 1.0, lambda_rev: 1.0, holdout: 0.2, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct DannFit {
    pub loss_curve: Vec<f64>,
    /// Domain-head accuracy on the holdout rows (`None` without a holdout).
    pub domain_accuracy: Option<f64>,
}

/// One batch of DANN. The class head and `φ` get the source cross-entropy
/// gradient; the domain head gets `λ ∂BCE`; `φ` gets the domain gradient
/// through the reversal, i.e. `-λ_rev λ ∂BCE`. Only rows flagged in
/// `src_dom` / `tgt_dom` enter the domain loss. Returns `(CCE, BCE)`.
#[allow(clippy::too_many_arguments)]
pub fn dann_batch_gradient(
    net: &FeedForwardNet,
    xs: &Matrix,
    ys: &Matrix,
    xt: &Matrix,
    src_dom: &[bool],
    tgt_dom: &[bool],
    cfg: &DannConfig,
    grad: &mut [f64],
) -> Result<(f64, f64)> {
    check_dim(xs.nrows(), ys.nrows())?;
    check_dim(xs.nrows(), src_dom.len())?;
    check_dim(xt.nrows(), tgt_dom.len())?;
    let ts = net.extractor_forward(xs)?;
    let tt = net.extractor_forward(xt)?;
    let p = net.head_probs(ts.latent(), HeadKind::Main)?;
    let scale = 1.0 / xs.nrows() as f64;
    let cce = soft_cce_loss(&p, ys, scale)?;
    let mut dzs = net.head_backward(
        ts.latent(),
        HeadKind::Main,
        &soft_cce_grad_logits(&p, ys, scale),
        grad,
    )?;
    let mut dzt = Matrix::zeros(xt.nrows(), tt.latent().ncols());

    let sel_s: Vec<usize> = (0..xs.nrows()).filter(|&i| src_dom[i]).collect();
    let sel_t: Vec<usize> = (0..xt.nrows()).filter(|&i| tgt_dom[i]).collect();
    let m = sel_s.len() + sel_t.len();
    let mut bce = 0.0;
    if m > 0 {
        let z = Matrix::from_fn(m, dzs.ncols(), |r, c| {
            if r < sel_s.len() {
                ts.latent()[(sel_s[r], c)]
            } else {
                tt.latent()[(sel_t[r - sel_s.len()], c)]
            }
        });
        let d: Vec<f64> = (0..m).map(|r| if r < sel_s.len() { 0.0 } else { 1.0 }).collect();
        let s = net.head_probs(&z, HeadKind::Domain)?;
        bce = bce_loss(s.as_slice(), &d)?;
        let dlogit = Matrix::from_fn(m, 1, |r, _| cfg.lambda * (s[r] - d[r]) / m as f64);
        let dz = net.head_backward(&z, HeadKind::Domain, &dlogit, grad)?;
        let dz = GradReversal { lambda: cfg.lambda_rev }.backward(&dz);
        for (r, &i) in sel_s.iter().enumerate() {
            let mut row = dzs.row_mut(i);
            row += dz.row(r);
        }
        for (r, &i) in sel_t.iter().enumerate() {
            let mut row = dzt.row_mut(i);
            row += dz.row(sel_s.len() + r);
        }
    }
    net.extractor_backward(&ts, &dzs, grad);
    net.extractor_backward(&tt, &dzt, grad);
    Ok((cce, bce))
}

fn holdout_mask(n: usize, frac: f64, rng: &mut Rng) -> Vec<bool> {
    let mut train = vec![true; n];
    if n >= 2 && frac > 0.0 {
        let k = (libm::round(n as f64 * frac) as usize).clamp(1, n - 1);
        for i in rng.sample_indices(n, k) {
            train[i] = false;
        }
    }
    train
}

fn pick(mask: &[bool], idx: &[usize]) -> Vec<bool> {
    idx.iter().map(|&i| mask[i]).collect()
}

/// Adversarial training with a domain discriminator behind a gradient
/// reversal. `net` needs main and domain heads.
pub fn dann_fit(
    net: &mut FeedForwardNet,
    source: &LabeledDataset,
    target: &Matrix,
    cfg: &DannConfig,
) -> Result<DannFit> {
    check_dim(source.dim(), target.ncols())?;
    if !net.has_head(HeadKind::Domain) {
        return Err(Error::invalid("DANN needs a domain head"));
    }
    if !(0.0..1.0).contains(&cfg.holdout) {
        return Err(Error::invalid("holdout fraction must lie in [0, 1)"));
    }
    let mut rng = Rng::with_stream(cfg.train.seed, 2);
    let src_mask = holdout_mask(source.len(), cfg.holdout, &mut rng);
    let tgt_mask = holdout_mask(target.nrows(), cfg.holdout, &mut rng);
    let y = source.one_hot();
    let domain_rows = |mask_s: bool| {
        let s: Vec<usize> = (0..source.len()).filter(|&i| src_mask[i] == mask_s).collect();
        let t: Vec<usize> = (0..target.nrows()).filter(|&i| tgt_mask[i] == mask_s).collect();
        let x = Matrix::from_fn(s.len() + t.len(), source.dim(), |r, c| {
            if r < s.len() {
                source.features()[(s[r], c)]
            } else {
                target[(t[r - s.len()], c)]
            }
        });
        let d: Vec<f64> = (0..s.len() + t.len()).map(|r| if r < s.len() { 0.0 } else { 1.0 }).collect();
        (x, d)
    };
    let (x_dom, d_dom) = domain_rows(true);
    let (x_hold, d_hold) = domain_rows(false);

    let step = |net: &FeedForwardNet, sb: &[usize], tb: &[usize], grad: &mut [f64]| {
        let xs = rows(source.features(), sb);
        let ys = rows(&y, sb);
        let xt = rows(target, tb);
        dann_batch_gradient(net, &xs, &ys, &xt, &pick(&src_mask, sb), &pick(&tgt_mask, tb), cfg, grad)
            .map(|_| ())
    };
    let full = |net: &FeedForwardNet| -> Result<f64> {
        let cce = full_batch_loss(net, source.features(), &y, HeadKind::Main)?;
        let s = net.forward(&x_dom, HeadKind::Domain)?;
        Ok(cce + cfg.lambda * bce_loss(s.as_slice(), &d_dom)?)
    };
    let loss_curve = paired_sgd(net, source.len(), target.nrows(), &cfg.train, step, full)?;
    let domain_accuracy = if d_hold.is_empty() {
        None
    } else {
        let s = net.forward(&x_hold, HeadKind::Domain)?;
        let hits = s.iter().zip(&d_hold).filter(|(p, d)| (**p >= 0.5) == (**d > 0.5)).count();
        Some(hits as f64 / d_hold.len() as f64)
    };
    Ok(DannFit { loss_curve, domain_accuracy })
}
