//! Dataset dictionary learning. Every domain (the sources, then the target
//! with OT pseudo-labels) is approximated by a Wasserstein barycenter of a
//! few learned labeled atoms; the atoms and the per-domain barycentric
//! coordinates are fit by block alternation.
//!
//! One outer iteration:
//! 1. warm-started barycenter of the atoms for each domain, a few
//!    fixed-point steps, and the plan from it to the domain;
//! 2. exponentiated-gradient step on each domain's weights, halved while it
//!    raises that domain's transport cost;
//! 3. each atom point moves toward the weighted average of where the
//!    barycenter points it feeds are sent by the domain plans.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_sources, pseudo_label_target, TARGET_DOMAIN};
use crate::dataset::{LabeledDataset, SimplexWeights, SoftLabeled};
use crate::error::{check_dim, Error, Result};
use crate::nn::{train_erm, Architecture, FeedForwardNet, HeadKind, TrainConfig};
use crate::ot::{
    barycenter_from, barycentric_map, fixed_point_step, plans_to, soft_labeled_cost, solve_plan,
    BarycenterConfig, LabelCost, OtSolver,
    TransportPlan,
};

use crate::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DadilConfig {
    /// Number of atoms; one per source when absent.
    pub n_atoms: Option<usize>,
    /// Points per atom; the smallest domain size when absent.
    pub atom_size: Option<usize>,
    pub beta: f64,
    pub label_cost: LabelCost,
    pub iters: usize,
    /// Fixed-point steps per barycenter per outer iteration.
    pub inner_iters: usize,
    pub atom_step: f64,
    pub weight_step: f64,
    /// Halvings of the weight step before it is skipped.
    pub max_backtracks: usize,
    pub solver: OtSolver,
}

impl Default for DadilConfig {
    fn default() -> Self {
        DadilConfig {
            n_atoms: None,
            atom_size: None,
            beta: 1.0,
            label_cost: LabelCost::Indicator,
            iters: 50,
            inner_iters: 5,
            atom_step: 0.5,
            weight_step: 0.1,
            max_backtracks: 3,
            solver: OtSolver::Auto,
        }
    }
}

impl DadilConfig {
    fn barycenter(&self, n_b: usize, max_iter: usize) -> BarycenterConfig {
        BarycenterConfig {
            beta: self.beta,
            label_cost: self.label_cost,
            support_size: n_b,
            max_iter,
            tol: 1e-9,
            solver: self.solver,
        }
    }

    fn label_scale(&self) -> f64 {
        match self.label_cost {
            LabelCost::Indicator => 0.5 * self.beta,
            LabelCost::SquaredLabel => self.beta,
        }
    }
}

/// Labeled atoms plus one weight vector per domain; the last weight vector
/// belongs to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: Vec<SoftLabeled>,
    pub weights: Vec<SimplexWeights>,
}

impl Dictionary {
    pub fn validate(&self) -> Result<()> {
        let first = self.atoms.first().ok_or_else(|| Error::invalid("dictionary without atoms"))?;
        for a in &self.atoms {
            check_dim(first.dim(), a.dim())?;
            check_dim(first.class_count(), a.class_count())?;
        }
        if self.weights.is_empty() {
            return Err(Error::invalid("dictionary without domain weights"));
        }
        for w in &self.weights {
            check_dim(self.atoms.len(), w.len())?;
        }
        Ok(())
    }

    pub fn target_weights(&self) -> &SimplexWeights {
        self.weights.last().expect("validated dictionary")
    }

    /// Barycenter of the atoms under the weights of domain `domain`,
    /// started from the atom with the largest weight.
    pub fn reconstruct(&self, domain: usize, cfg: &DadilConfig) -> Result<SoftLabeled> {
        self.validate()?;
        let alpha = self.weights.get(domain).ok_or_else(|| Error::invalid("domain index out of range"))?;
        let init = self.atoms[dominant(alpha)].clone();
        let bcfg = cfg.barycenter(init.len(), BarycenterConfig::default().max_iter);
        Ok(barycenter_from(&self.atoms, alpha, init, &bcfg)?.support)
    }
}

#[derive(Debug, Clone)]
pub struct DadilFit {
    pub dictionary: Dictionary,
    /// Mean domain-to-barycenter transport cost, once per outer iteration
    /// plus once for the final dictionary.
    pub loss_trace: Vec<f64>,
}

fn dominant(alpha: &SimplexWeights) -> usize {
    let v = alpha.values();
    (0..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b })
}

/// Gaussian features matching the pooled per-feature mean and spread, with
/// class-balanced one-hot labels.
fn initial_atoms(domains: &[SoftLabeled], k: usize, n: usize, rng: &mut Rng) -> Result<Vec<SoftLabeled>> {
    let (d, nc) = (domains[0].dim(), domains[0].class_count());
    let total: usize = domains.iter().map(|p| p.len()).sum();
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for p in domains {
        for r in p.features.row_iter() {
            for j in 0..d {
                mean[j] += r[j];
                sq[j] += r[j] * r[j];
            }
        }
    }
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            mean[j] /= total as f64;
            libm::sqrt((sq[j] / total as f64 - mean[j] * mean[j]).max(0.0))
        })
        .collect();
    (0..k)
        .map(|_| {
            let x = Matrix::from_fn(n, d, |_, j| mean[j] + sd[j] * rng.normal());
            let y = Matrix::from_fn(n, nc, |i, c| if i % nc == c { 1.0 } else { 0.0 });
            SoftLabeled::uniform(x, y)
        })
        .collect()
}

struct DomainState {
    plans: Vec<Option<TransportPlan>>,
    loss: f64,
    /// Barycenter support minus its image under the domain plan.
    dx: Matrix,
    dy: Matrix,
}

fn transport_to(b: &SoftLabeled, p: &SoftLabeled, cfg: &DadilConfig) -> Result<(f64, TransportPlan)> {
    let cost = soft_labeled_cost(&b.features, &b.labels, &p.features, &p.labels, cfg.beta, cfg.label_cost)?;
    let plan = solve_plan(&b.weights, &p.weights, &cost, cfg.solver)?;
    Ok((plan.cost(&cost), plan))
}

fn domain_state(
    support: &SoftLabeled,
    atoms: &[SoftLabeled],
    alpha: &SimplexWeights,
    p: &SoftLabeled,
    cfg: &DadilConfig,
) -> Result<DomainState> {
    let (plans, _) = plans_to(support, atoms, alpha, &cfg.barycenter(support.len(), 0))?;
    let (loss, plan) = transport_to(support, p, cfg)?;
    let dx = &support.features - barycentric_map(&plan, &p.features)?;
    let dy = &support.labels - barycentric_map(&plan, &p.labels)?;
    Ok(DomainState { plans, loss, dx, dy })
}

/// `∂W/∂α_k` with the atom plans held fixed: the barycenter point moves by
/// the barycentric image of atom `k`.
fn weight_gradient(st: &DomainState, atoms: &[SoftLabeled], n_b: usize, cfg: &DadilConfig) -> Result<Vec<f64>> {
    let scale = 2.0 / n_b as f64;
    let mut g = vec![0.0; atoms.len()];
    for (k, plan) in st.plans.iter().enumerate() {
        if let Some(plan) = plan {
            let tx = barycentric_map(plan, &atoms[k].features)?;
            let ty = barycentric_map(plan, &atoms[k].labels)?;
            g[k] = scale * (st.dx.dot(&tx) + cfg.label_scale() * st.dy.dot(&ty));
        }
    }
    Ok(g)
}

fn weight_step(
    st: &DomainState,
    atoms: &[SoftLabeled],
    alpha: &SimplexWeights,
    p: &SoftLabeled,
    n_b: usize,
    cfg: &DadilConfig,
) -> Result<SimplexWeights> {
    if alpha.len() == 1 {
        return Ok(alpha.clone());
    }
    let g = weight_gradient(st, atoms, n_b, cfg)?;
    // Exponentiated gradient is invariant to shifting g; centering on the
    // weighted mean keeps the exponent small.
    let g_bar: f64 = g.iter().zip(alpha.values()).map(|(g, a)| g * a).sum();
    // Compare against the barycenter these plans actually produce.
    let at = |w: &SimplexWeights| -> Result<f64> {
        let (x, y) = fixed_point_step(&st.plans, atoms, w, n_b)?;
        let b = SoftLabeled::uniform(x, y)?;
        Ok(transport_to(&b, p, cfg)?.0)
    };
    let base = at(alpha)?;
    let mut eta = cfg.weight_step;
    for _ in 0..=cfg.max_backtracks {
        let raw: Vec<f64> = alpha
            .values()
            .iter()
            .zip(&g)
            .map(|(a, gk)| a * libm::exp(-eta * (gk - g_bar)))
            .collect();
        let cand = SimplexWeights::normalize(&raw)?;
        if at(&cand)? <= base {
            return Ok(cand);
        }
        eta *= 0.5;
    }
    Ok(alpha.clone())
}

/// Fit a dictionary to the sources and the (pseudo-labeled) target.
pub fn dadil_fit(
    sources: &[LabeledDataset],
    target: &Matrix,
    cfg: &DadilConfig,
    rng: &mut Rng,
) -> Result<DadilFit> {
    check_sources(sources, target)?;
    if !(cfg.atom_step > 0.0 && cfg.weight_step > 0.0 && cfg.beta >= 0.0) {
        return Err(Error::invalid("DaDiL steps must be positive and beta >= 0"));
    }
    let mut domains = sources.iter().map(SoftLabeled::from_dataset).collect::<Result<Vec<_>>>()?;
    domains.push(SoftLabeled::uniform(
        target.clone(),
        pseudo_label_target(sources, target, cfg.solver)?,
    )?);
    let total: usize = domains.iter().map(|p| p.len()).sum();
    let k = cfg.n_atoms.unwrap_or(sources.len());
    if k == 0 || k > total {
        return Err(Error::invalid("number of atoms must be between 1 and the total sample count"));
    }
    let n_b = cfg.atom_size.unwrap_or_else(|| domains.iter().map(|p| p.len()).min().unwrap_or(1));
    if n_b == 0 {
        return Err(Error::invalid("atoms need at least one point"));
    }
    let mut atoms = initial_atoms(&domains, k, n_b, rng)?;
    let mut weights = vec![SimplexWeights::uniform(k); domains.len()];
    let mut supports: Vec<Option<SoftLabeled>> = vec![None; domains.len()];
    let inner = cfg.barycenter(n_b, cfg.inner_iters);
    let mut trace = Vec::with_capacity(cfg.iters + 1);

    for it in 0..=cfg.iters {
        let mut states = Vec::with_capacity(domains.len());
        for (l, p) in domains.iter().enumerate() {
            let init = supports[l].take().unwrap_or_else(|| atoms[dominant(&weights[l])].clone());
            let b = barycenter_from(&atoms, &weights[l], init, &inner)?.support;
            states.push(domain_state(&b, &atoms, &weights[l], p, cfg)?);
            supports[l] = Some(b);
        }
        let loss = states.iter().map(|s| s.loss).sum::<f64>() / domains.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("dictionary loss".into()));
        }
        trace.push(loss);
        log::debug!("dadil: iteration {it}, loss {loss}");
        if it == cfg.iters {
            break;
        }

        // Atom displacement: plan-weighted average over the barycenter points
        // each atom point feeds, then over domains by weight.
        let d = atoms[0].dim();
        let nc = atoms[0].class_count();
        let mut num_x = vec![Matrix::zeros(n_b, d); k];
        let mut num_y = vec![Matrix::zeros(n_b, nc); k];
        let mut den = vec![0.0; k];
        for (st, alpha) in states.iter().zip(&weights) {
            for (j, plan) in st.plans.iter().enumerate() {
                if let Some(plan) = plan {
                    let a = alpha.values()[j];
                    let g = plan.values().transpose() * n_b as f64;
                    num_x[j] += (&g * &st.dx) * a;
                    num_y[j] += (&g * &st.dy) * a;
                    den[j] += a;
                }
            }
        }

        let new_weights = states
            .iter()
            .zip(&weights)
            .zip(&domains)
            .map(|((st, alpha), p)| weight_step(st, &atoms, alpha, p, n_b, cfg))
            .collect::<Result<Vec<_>>>()?;
        weights = new_weights;

        for j in 0..k {
            if den[j] == 0.0 {
                continue;
            }
            let step = cfg.atom_step / den[j];
            let atom = &mut atoms[j];
            atom.features -= &num_x[j] * step;
            atom.labels -= &num_y[j] * step;
            for mut r in atom.labels.row_iter_mut() {
                let v: Vec<f64> = r.iter().copied().collect();
                for (dst, src) in r.iter_mut().zip(SimplexWeights::project(&v).values()) {
                    *dst = *src;
                }
            }
        }
    }
    let dictionary = Dictionary { atoms, weights };
    dictionary.validate()?;
    Ok(DadilFit { dictionary, loss_trace: trace })
}

/// Target reconstruction `B(α_T; Q)` with labels hardened by argmax.
pub fn dadil_r_transform(dict: &Dictionary, cfg: &DadilConfig) -> Result<LabeledDataset> {
    let b = dict.reconstruct(dict.weights.len() - 1, cfg)?;
    b.to_dataset(TARGET_DOMAIN)
}

/// One classifier per atom, trained on the atom's argmax labels. Atom `k`
/// uses `seed + k`.
pub fn dadil_atomic_classifiers(
    dict: &Dictionary,
    arch: &Architecture,
    train: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<FeedForwardNet>> {
    dict.validate()?;
    dict.atoms
        .iter()
        .enumerate()
        .map(|(k, atom)| {
            let mut net = FeedForwardNet::new(arch.clone(), rng)?;
            let cfg = TrainConfig { seed: train.seed.wrapping_add(k as u64), ..*train };
            train_erm(&mut net, &atom.to_dataset(TARGET_DOMAIN)?, &cfg)?;
            Ok(net)
        })
        .collect()
}

/// `Σ_k α_{T,k} ĥ_k(x)`.
pub fn dadil_e_predict(dict: &Dictionary, classifiers: &[FeedForwardNet], x: &Matrix) -> Result<Matrix> {
    dict.validate()?;
    check_dim(dict.atoms.len(), classifiers.len())?;
    let nc = dict.atoms[0].class_count();
    let mut out = Matrix::zeros(x.nrows(), nc);
    for (h, &a) in classifiers.iter().zip(dict.target_weights().values()) {
        if a > 0.0 {
            out += h.forward(x, HeadKind::Main)? * a;
        }
    }
    Ok(out)
}
