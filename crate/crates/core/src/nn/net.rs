use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrixView, DMatrixViewMut};

use super::loss::{sigmoid, softmax_rows};
use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Rng};

/// Role of an output head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "role", content = "index", rename_all = "snake_case"))]
pub enum HeadKind {
    /// Class head `h` (softmax).
    Main,
    /// Domain discriminator `h_d` (single sigmoid output).
    Domain,
    /// Per-source class head `h_k`.
    Source(u32),
    /// Second per-source head `h'_k` for the discrepancy phases.
    Paired(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub outputs: usize,
}

/// Shape of a net: input width, hidden widths of `φ` (the last is the latent
/// width; empty means `φ` is the identity) and the heads.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    pub input_dim: usize,
    pub extractor: Vec<usize>,
    pub heads: Vec<HeadSpec>,
}

impl Architecture {
    /// `φ` with the given hidden widths and one main class head.
    pub fn classifier(input_dim: usize, extractor: &[usize], n_classes: usize) -> Self {
        Architecture {
            input_dim,
            extractor: extractor.to_vec(),
            heads: vec![HeadSpec { kind: HeadKind::Main, outputs: n_classes }],
        }
    }

    pub fn with_head(mut self, kind: HeadKind, outputs: usize) -> Self {
        self.heads.push(HeadSpec { kind, outputs });
        self
    }

    pub fn latent_dim(&self) -> usize {
        *self.extractor.last().unwrap_or(&self.input_dim)
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut prev = self.input_dim;
        for &h in &self.extractor {
            n += prev * h + h;
            prev = h;
        }
        n + self.heads.iter().map(|h| prev * h.outputs + h.outputs).sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.extractor.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        for (i, h) in self.heads.iter().enumerate() {
            if h.outputs == 0 {
                return Err(Error::invalid("head with no outputs"));
            }
            if h.kind == HeadKind::Domain && h.outputs != 1 {
                return Err(Error::invalid("domain head must have one output"));
            }
            if self.heads[..i].iter().any(|o| o.kind == h.kind) {
                return Err(Error::invalid(format!("duplicate head {:?}", h.kind)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    offset: usize,
    inp: usize,
    out: usize,
}

impl Layer {
    fn bias(&self) -> usize {
        self.offset + self.inp * self.out
    }

    fn end(&self) -> usize {
        self.bias() + self.out
    }
}

/// Activations of `φ` kept for backprop: `acts[0]` is the input, the last
/// entry is the latent `z`.
#[derive(Debug, Clone)]
pub struct ExtractorTape {
    acts: Vec<Matrix>,
}

impl ExtractorTape {
    pub fn latent(&self) -> &Matrix {
        self.acts.last().expect("tape holds the input")
    }
}

/// Feature extractor plus heads over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    arch: Architecture,
    params: Vec<f64>,
    layers: Vec<Layer>,
    heads: Vec<Layer>,
}

impl FeedForwardNet {
    /// Glorot-uniform weights, zero biases.
    pub fn new(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let all: Vec<Layer> = net.layers.iter().chain(&net.heads).copied().collect();
        for l in all {
            let a = libm::sqrt(6.0 / (l.inp + l.out) as f64);
            for p in &mut net.params[l.offset..l.bias()] {
                *p = rng.uniform_range(-a, a);
            }
        }
        Ok(net)
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.param_count();
        Self::from_parts(arch, vec![0.0; n])
    }

    /// Rebuild from a descriptor and a parameter vector (checkpoint load).
    pub fn from_parts(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        check_dim(arch.param_count(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        let mut offset = 0;
        let mut prev = arch.input_dim;
        let mut layers = Vec::new();
        for &h in &arch.extractor {
            let l = Layer { offset, inp: prev, out: h };
            offset = l.end();
            prev = h;
            layers.push(l);
        }
        let mut heads = Vec::new();
        for h in &arch.heads {
            let l = Layer { offset, inp: prev, out: h.outputs };
            offset = l.end();
            heads.push(l);
        }
        Ok(FeedForwardNet { arch, params, layers, heads })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn has_head(&self, kind: HeadKind) -> bool {
        self.arch.heads.iter().any(|h| h.kind == kind)
    }

    fn head_layer(&self, kind: HeadKind) -> Result<Layer> {
        self.arch
            .heads
            .iter()
            .position(|h| h.kind == kind)
            .map(|i| self.heads[i])
            .ok_or_else(|| Error::invalid(format!("unknown head {kind:?}")))
    }

    /// Parameter index range owned by a head (weights then bias).
    pub fn head_param_range(&self, kind: HeadKind) -> Result<core::ops::Range<usize>> {
        let l = self.head_layer(kind)?;
        Ok(l.offset..l.end())
    }

    /// Parameter index range owned by `φ`.
    pub fn extractor_param_range(&self) -> core::ops::Range<usize> {
        0..self.layers.last().map_or(0, |l| l.end())
    }

    fn weights(&self, l: &Layer) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.params[l.offset..l.bias()], l.inp, l.out)
    }

    fn affine(&self, l: &Layer, a: &Matrix) -> Matrix {
        let mut z = a * self.weights(l);
        let b = &self.params[l.bias()..l.end()];
        for mut row in z.row_iter_mut() {
            for (v, bj) in row.iter_mut().zip(b) {
                *v += bj;
            }
        }
        z
    }

    /// Accumulate the affine layer's parameter gradient and return `∂/∂a`.
    fn affine_backward(&self, l: &Layer, a: &Matrix, dz: &Matrix, grad: &mut [f64]) -> Matrix {
        let (w_part, b_part) = grad[l.offset..l.end()].split_at_mut(l.inp * l.out);
        let mut gw = DMatrixViewMut::from_slice(w_part, l.inp, l.out);
        gw.gemm_tr(1.0, a, dz, 1.0);
        for (j, g) in b_part.iter_mut().enumerate() {
            *g += dz.column(j).sum();
        }
        dz * self.weights(l).transpose()
    }

    pub fn extractor_forward(&self, x: &Matrix) -> Result<ExtractorTape> {
        check_dim(self.arch.input_dim, x.ncols())?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for l in &self.layers {
            let mut z = self.affine(l, acts.last().unwrap());
            z.apply(|v| *v = v.max(0.0));
            acts.push(z);
        }
        Ok(ExtractorTape { acts })
    }

    /// Latent features `z = φ(x)`.
    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = self.extractor_forward(x)?;
        Ok(tape.acts.pop().unwrap())
    }

    /// Accumulate `φ`'s parameter gradient given `∂L/∂z`.
    pub fn extractor_backward(&self, tape: &ExtractorTape, dz: &Matrix, grad: &mut [f64]) {
        check_dim(self.params.len(), grad.len()).expect("gradient buffer size");
        let mut d = dz.clone();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let out = &tape.acts[k + 1];
            d.zip_apply(out, |g, a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            d = self.affine_backward(l, &tape.acts[k], &d, grad);
        }
    }

    /// Raw head outputs (logits) on latent features.
    pub fn head_logits(&self, z: &Matrix, head: HeadKind) -> Result<Matrix> {
        let l = self.head_layer(head)?;
        check_dim(l.inp, z.ncols())?;
        Ok(self.affine(&l, z))
    }

    /// Accumulate the head's parameter gradient given `∂L/∂logits`; returns
    /// `∂L/∂z`.
    pub fn head_backward(
        &self,
        z: &Matrix,
        head: HeadKind,
        dlogits: &Matrix,
        grad: &mut [f64],
    ) -> Result<Matrix> {
        let l = self.head_layer(head)?;
        check_dim(self.params.len(), grad.len())?;
        Ok(self.affine_backward(&l, z, dlogits, grad))
    }

    /// Head probabilities from latent features: softmax for class heads,
    /// sigmoid for the domain head.
    pub fn head_probs(&self, z: &Matrix, head: HeadKind) -> Result<Matrix> {
        let logits = self.head_logits(z, head)?;
        Ok(match head {
            HeadKind::Domain => logits.map(sigmoid),
            _ => softmax_rows(&logits),
        })
    }

    /// `h(φ(x))`.
    pub fn forward(&self, x: &Matrix, head: HeadKind) -> Result<Matrix> {
        self.head_layer(head)?;
        let z = self.features(x)?;
        self.head_probs(&z, head)
    }
}

/// Identity on the forward pass, `-λ_rev ·` upstream gradient on the way back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReversal {
    pub lambda: f64,
}

impl GradReversal {
    pub fn forward(&self, z: &Matrix) -> Matrix {
        z.clone()
    }

    pub fn backward(&self, upstream: &Matrix) -> Matrix {
        upstream * -self.lambda
    }
}
