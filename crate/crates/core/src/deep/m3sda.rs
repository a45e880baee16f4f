//! Moment matching across several sources with one class head per source.
//!
//! The two moment penalties are kept under descriptive names:
//! `Ω_src_tgt = (1/N) Σ_p Σ_k ‖μ_k^p - μ_T^p‖` and
//! `Ω_src_src = c Σ_p Σ_{i<j} ‖μ_i^p - μ_j^p‖`, where `μ^p` is the mean of
//! the entry-wise `p`-th power of the latent features, `p ∈ {1, 2}`, and `c`
//! is set by [`PairNorm`].

use alloc::vec;
use alloc::vec::Vec;

use super::CyclingSampler;
use crate::dataset::{LabeledDataset, SimplexWeights};
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    check_finite, full_batch_loss, rows, sgd_update, soft_cce_grad_logits, soft_cce_loss,
    Architecture, FeedForwardNet, HeadKind, TrainConfig,
};
use crate::{Matrix, Rng};

/// Scaling `c` of the source-source penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PairNorm {
    /// `c = 1 / C(N, 2)`: the mean over source pairs.
    #[default]
    Average,
    /// `c = C(N, 2)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct M3sdaConfig {
    /// Weight of `Ω_src_tgt + Ω_src_src`.
    pub lambda: f64,
    /// Add the two classifier-discrepancy phases after every batch.
    pub beta_variant: bool,
    pub pair_norm: PairNorm,
    /// Fraction of every source held out to weight its head.
    pub holdout: f64,
    pub train: TrainConfig,
}

impl Default for M3sdaConfig {
    fn default() -> Self {
        M3sdaConfig {
            lambda: 1.0,
            beta_variant: false,
            pair_norm: PairNorm::Average,
            holdout: 0.2,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct M3sdaFit {
    /// `w_k = acc_k / Σ acc_ℓ` from the holdout accuracies.
    pub weights: SimplexWeights,
    /// Every head scored zero on its holdout; uniform weights were used.
    pub uniform_fallback: bool,
    pub holdout_accuracy: Vec<f64>,
    pub loss_curve: Vec<f64>,
}

/// Extractor plus `N` source heads (and `N` paired heads for the β variant).
pub fn m3sda_architecture(
    input_dim: usize,
    extractor: &[usize],
    n_classes: usize,
    n_sources: usize,
    beta_variant: bool,
) -> Architecture {
    let mut arch = Architecture { input_dim, extractor: extractor.to_vec(), heads: Vec::new() };
    for k in 0..n_sources as u32 {
        arch = arch.with_head(HeadKind::Source(k), n_classes);
    }
    if beta_variant {
        for k in 0..n_sources as u32 {
            arch = arch.with_head(HeadKind::Paired(k), n_classes);
        }
    }
    arch
}

fn pair_factor(n: usize, norm: PairNorm) -> f64 {
    let pairs = (n * (n - 1) / 2) as f64;
    match norm {
        PairNorm::Average => 1.0 / pairs,
        PairNorm::Literal => pairs,
    }
}

fn moments(z: &Matrix) -> [Vec<f64>; 2] {
    let n = z.nrows() as f64;
    let d = z.ncols();
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for i in 0..z.nrows() {
        for c in 0..d {
            let v = z[(i, c)];
            m1[c] += v;
            m2[c] += v * v;
        }
    }
    m1.iter_mut().for_each(|v| *v /= n);
    m2.iter_mut().for_each(|v| *v /= n);
    [m1, m2]
}

/// `‖a - b‖` and its unit direction (zero when `a = b`).
fn norm_dir(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = libm::sqrt(diff.iter().map(|v| v * v).sum::<f64>());
    let dir = if n > 0.0 { diff.iter().map(|v| v / n).collect() } else { vec![0.0; a.len()] };
    (n, dir)
}

struct Penalty {
    src_tgt: f64,
    src_src: f64,
    dzs: Vec<Matrix>,
    dzt: Matrix,
}

fn penalties(zs: &[&Matrix], zt: &Matrix, norm: PairNorm) -> Result<Penalty> {
    let n = zs.len();
    if n < 2 {
        return Err(Error::invalid("moment matching needs at least two sources"));
    }
    let d = zt.ncols();
    for z in zs {
        check_dim(d, z.ncols())?;
        if z.nrows() == 0 {
            return Err(Error::invalid("empty source batch"));
        }
    }
    if zt.nrows() == 0 {
        return Err(Error::invalid("empty target batch"));
    }
    let ms: Vec<[Vec<f64>; 2]> = zs.iter().map(|z| moments(z)).collect();
    let mt = moments(zt);
    let c = pair_factor(n, norm);
    // Gradients with respect to the moment vectors.
    let mut gs: Vec<[Vec<f64>; 2]> = vec![[vec![0.0; d], vec![0.0; d]]; n];
    let mut gt = [vec![0.0; d], vec![0.0; d]];
    let (mut src_tgt, mut src_src) = (0.0, 0.0);
    for p in 0..2 {
        for k in 0..n {
            let (v, u) = norm_dir(&ms[k][p], &mt[p]);
            src_tgt += v / n as f64;
            for e in 0..d {
                gs[k][p][e] += u[e] / n as f64;
                gt[p][e] -= u[e] / n as f64;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (v, u) = norm_dir(&ms[i][p], &ms[j][p]);
                src_src += c * v;
                for e in 0..d {
                    gs[i][p][e] += c * u[e];
                    gs[j][p][e] -= c * u[e];
                }
            }
        }
    }
    let back = |z: &Matrix, g: &[Vec<f64>; 2]| {
        let n = z.nrows() as f64;
        Matrix::from_fn(z.nrows(), d, |i, e| (g[0][e] + 2.0 * z[(i, e)] * g[1][e]) / n)
    };
    let dzs = zs.iter().zip(&gs).map(|(z, g)| back(z, g)).collect();
    let dzt = back(zt, &gt);
    Ok(Penalty { src_tgt, src_src, dzs, dzt })
}

/// `(Ω_src_tgt, Ω_src_src)` on the given latent samples.
pub fn moment_penalties(zs: &[Matrix], zt: &Matrix, norm: PairNorm) -> Result<(f64, f64)> {
    let refs: Vec<&Matrix> = zs.iter().collect();
    let p = penalties(&refs, zt, norm)?;
    Ok((p.src_tgt, p.src_src))
}

/// Main phase on one batch per domain:
/// `(1/N) Σ_k CCE(h_k(φ(x_k)), y_k) + λ (Ω_src_tgt + Ω_src_src)`.
pub fn m3sda_batch_gradient(
    net: &FeedForwardNet,
    xs: &[Matrix],
    ys: &[Matrix],
    xt: &Matrix,
    cfg: &M3sdaConfig,
    grad: &mut [f64],
) -> Result<f64> {
    check_dim(xs.len(), ys.len())?;
    let n = xs.len();
    let tapes = xs.iter().map(|x| net.extractor_forward(x)).collect::<Result<Vec<_>>>()?;
    let tt = net.extractor_forward(xt)?;
    let lat: Vec<&Matrix> = tapes.iter().map(|t| t.latent()).collect();
    let pen = penalties(&lat, tt.latent(), cfg.pair_norm)?;
    let mut loss = cfg.lambda * (pen.src_tgt + pen.src_src);
    for (k, tape) in tapes.iter().enumerate() {
        let head = HeadKind::Source(k as u32);
        let p = net.head_probs(tape.latent(), head)?;
        let scale = 1.0 / (n * xs[k].nrows()) as f64;
        loss += soft_cce_loss(&p, &ys[k], scale)?;
        let dz = net.head_backward(tape.latent(), head, &soft_cce_grad_logits(&p, &ys[k], scale), grad)?;
        net.extractor_backward(tape, &(dz + &pen.dzs[k] * cfg.lambda), grad);
    }
    net.extractor_backward(&tt, &(&pen.dzt * cfg.lambda), grad);
    Ok(loss)
}

/// `∂/∂logits` of `Σ_c |p_c - q_c|` through the softmax producing `p`.
fn l1_softmax_grad(p: &Matrix, q: &Matrix, scale: f64) -> Matrix {
    let mut g = Matrix::zeros(p.nrows(), p.ncols());
    for i in 0..p.nrows() {
        let s: Vec<f64> = (0..p.ncols()).map(|c| sign(p[(i, c)] - q[(i, c)])).collect();
        let inner: f64 = (0..p.ncols()).map(|c| s[c] * p[(i, c)]).sum();
        for c in 0..p.ncols() {
            g[(i, c)] = scale * p[(i, c)] * (s[c] - inner);
        }
    }
    g
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn discrepancy(p: &Matrix, q: &Matrix) -> f64 {
    p.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Discrepancy phases of the β variant. With `train_paired = true` the
/// objective is `Σ_k CCE(h'_k on source k) - Σ_k D_k` and only the paired
/// heads receive gradient; otherwise it is `Σ_k D_k` and only `φ` does.
/// `D_k` is the mean over target rows of `‖h_k(z) - h'_k(z)‖₁`.
pub fn m3sda_discrepancy_gradient(
    net: &FeedForwardNet,
    xs: &[Matrix],
    ys: &[Matrix],
    xt: &Matrix,
    train_paired: bool,
    grad: &mut [f64],
) -> Result<f64> {
    let n = xs.len();
    let mut scratch = vec![0.0; net.param_count()];
    let tt = net.extractor_forward(xt)?;
    let zt = tt.latent();
    let scale = 1.0 / xt.nrows() as f64;
    let sign = if train_paired { -1.0 } else { 1.0 };
    let mut loss = 0.0;
    let mut dzt = Matrix::zeros(zt.nrows(), zt.ncols());
    for k in 0..n as u32 {
        let (h, hp) = (HeadKind::Source(k), HeadKind::Paired(k));
        let p = net.head_probs(zt, h)?;
        let q = net.head_probs(zt, hp)?;
        loss += sign * scale * discrepancy(&p, &q);
        dzt += net.head_backward(zt, hp, &(l1_softmax_grad(&q, &p, scale) * sign), &mut scratch)?;
        if !train_paired {
            dzt += net.head_backward(zt, h, &l1_softmax_grad(&p, &q, scale), &mut scratch)?;
        }
    }
    if train_paired {
        check_dim(n, ys.len())?;
        for k in 0..n {
            let hp = HeadKind::Paired(k as u32);
            let z = net.features(&xs[k])?;
            let p = net.head_probs(&z, hp)?;
            let s = 1.0 / xs[k].nrows() as f64;
            loss += soft_cce_loss(&p, &ys[k], s)?;
            net.head_backward(&z, hp, &soft_cce_grad_logits(&p, &ys[k], s), &mut scratch)?;
        }
        for k in 0..n as u32 {
            for i in net.head_param_range(HeadKind::Paired(k))? {
                grad[i] += scratch[i];
            }
        }
    } else {
        let mut only_phi = vec![0.0; net.param_count()];
        net.extractor_backward(&tt, &dzt, &mut only_phi);
        for i in net.extractor_param_range() {
            grad[i] += only_phi[i];
        }
    }
    Ok(loss)
}

/// `Σ_k w_k h_k(φ(x))`.
pub fn m3sda_predict(net: &FeedForwardNet, x: &Matrix, weights: &SimplexWeights) -> Result<Matrix> {
    let z = net.features(x)?;
    let mut out: Option<Matrix> = None;
    for (k, &w) in weights.values().iter().enumerate() {
        let p = net.head_probs(&z, HeadKind::Source(k as u32))? * w;
        out = Some(match out {
            Some(acc) => acc + p,
            None => p,
        });
    }
    out.ok_or_else(|| Error::invalid("no source weights"))
}

fn split_holdout(n: usize, frac: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    if n < 2 || frac <= 0.0 {
        return ((0..n).collect(), Vec::new());
    }
    let k = (libm::round(n as f64 * frac) as usize).clamp(1, n - 1);
    let perm = rng.permutation(n);
    let mut hold = perm[..k].to_vec();
    let mut train = perm[k..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (train, hold)
}

/// Train the shared extractor and per-source heads. `net` must come from
/// [`m3sda_architecture`] with the same source count and variant.
pub fn m3sda_fit(
    net: &mut FeedForwardNet,
    sources: &[LabeledDataset],
    target: &Matrix,
    cfg: &M3sdaConfig,
) -> Result<M3sdaFit> {
    let n = sources.len();
    if n < 2 {
        return Err(Error::invalid("M3SDA needs at least two sources; use a single-source method"));
    }
    cfg.train.validate()?;
    if target.nrows() == 0 {
        return Err(Error::invalid("empty target"));
    }
    for (k, s) in sources.iter().enumerate() {
        check_dim(target.ncols(), s.dim())?;
        if !net.has_head(HeadKind::Source(k as u32))
            || (cfg.beta_variant && !net.has_head(HeadKind::Paired(k as u32)))
        {
            return Err(Error::invalid("network heads do not match the source count"));
        }
    }
    let mut split_rng = Rng::with_stream(cfg.train.seed, n as u64 + 1);
    let splits: Vec<(Vec<usize>, Vec<usize>)> =
        sources.iter().map(|s| split_holdout(s.len(), cfg.holdout, &mut split_rng)).collect();
    let xs: Vec<Matrix> = sources.iter().zip(&splits).map(|(s, (tr, _))| rows(s.features(), tr)).collect();
    let ys: Vec<Matrix> =
        sources.iter().zip(&splits).map(|(s, (tr, _))| rows(&s.one_hot(), tr)).collect();

    let mut samplers: Vec<CyclingSampler> = xs
        .iter()
        .enumerate()
        .map(|(k, x)| CyclingSampler::new(x.nrows(), Rng::with_stream(cfg.train.seed, k as u64)))
        .collect();
    let mut tgt = CyclingSampler::new(target.nrows(), Rng::with_stream(cfg.train.seed, n as u64));
    let full = |net: &FeedForwardNet| -> Result<f64> {
        let z: Vec<Matrix> = xs.iter().map(|x| net.features(x)).collect::<Result<_>>()?;
        let (a, b) = moment_penalties(&z, &net.features(target)?, cfg.pair_norm)?;
        let mut l = cfg.lambda * (a + b);
        for k in 0..n {
            l += full_batch_loss(net, &xs[k], &ys[k], HeadKind::Source(k as u32))? / n as f64;
        }
        Ok(l)
    };
    let largest = xs.iter().map(|x| x.nrows()).max().unwrap_or(1);
    let bs = cfg.train.batch_size;
    let steps = largest.div_ceil(bs);
    let mut curve = vec![full(net)?];
    check_finite(curve[0], "initial", 0)?;
    let mut grad = vec![0.0; net.param_count()];
    for epoch in 1..=cfg.train.epochs {
        for _ in 0..steps {
            let picks: Vec<Vec<usize>> = samplers.iter_mut().map(|s| s.take(bs)).collect();
            let bx: Vec<Matrix> = xs.iter().zip(&picks).map(|(x, i)| rows(x, i)).collect();
            let by: Vec<Matrix> = ys.iter().zip(&picks).map(|(y, i)| rows(y, i)).collect();
            let bt = rows(target, &tgt.take(bs));
            grad.iter_mut().for_each(|g| *g = 0.0);
            m3sda_batch_gradient(net, &bx, &by, &bt, cfg, &mut grad)?;
            sgd_update(net.params_mut(), &grad, cfg.train.lr, cfg.train.weight_decay);
            if cfg.beta_variant {
                for train_paired in [true, false] {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    m3sda_discrepancy_gradient(net, &bx, &by, &bt, train_paired, &mut grad)?;
                    sgd_update(net.params_mut(), &grad, cfg.train.lr, 0.0);
                }
            }
        }
        let l = full(net)?;
        check_finite(l, "training", epoch)?;
        curve.push(l);
    }

    let mut acc = Vec::with_capacity(n);
    for (k, (s, (_, hold))) in sources.iter().zip(&splits).enumerate() {
        if hold.is_empty() {
            acc.push(0.0);
            continue;
        }
        let p = net.forward(&rows(s.features(), hold), HeadKind::Source(k as u32))?;
        let labels: Vec<usize> = hold.iter().map(|&i| s.labels()[i]).collect();
        acc.push(crate::nn::accuracy_from_probs(&p, &labels)?);
    }
    let total: f64 = acc.iter().sum();
    let (weights, uniform_fallback) = if total > 0.0 {
        (SimplexWeights::normalize(&acc)?, false)
    } else {
        log::warn!("m3sda: no head scored on its holdout; using uniform weights");
        (SimplexWeights::uniform(n), true)
    };
    Ok(M3sdaFit { weights, uniform_fallback, holdout_accuracy: acc, loss_curve: curve })
}
