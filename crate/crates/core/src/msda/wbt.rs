//! Barycenter transport: pool the sources into a labeled Wasserstein
//! barycenter, then carry its support onto the target sample.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_sources, TARGET_DOMAIN};
use crate::dataset::{argmax_rows, LabeledDataset, SimplexWeights, SoftLabeled};
use crate::error::Result;
use crate::nn::{train_erm, FeedForwardNet, TrainConfig};
use crate::ot::{barycentric_map, cost_matrix, free_support_barycenter, solve_plan, Barycenter, BarycenterConfig};
use crate::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WbtConfig {
    /// Label weight, support size, solver and iteration budget of the
    /// barycenter; the solver is reused for the final transport.
    pub barycenter: BarycenterConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct WbtFit {
    pub barycenter: Barycenter,
    /// Barycenter support mapped onto the target, hard labels by argmax.
    pub transported: LabeledDataset,
    pub net: FeedForwardNet,
    pub loss_curve: Vec<f64>,
}

/// Uniform-weight barycenter of the sources, transported to `target`, with
/// `net` trained on the result.
pub fn wbt_fit(
    sources: &[LabeledDataset],
    target: &Matrix,
    cfg: &WbtConfig,
    mut net: FeedForwardNet,
    rng: &mut Rng,
) -> Result<WbtFit> {
    check_sources(sources, target)?;
    let dists = sources.iter().map(SoftLabeled::from_dataset).collect::<Result<Vec<_>>>()?;
    let alpha = SimplexWeights::uniform(sources.len());
    let barycenter = free_support_barycenter(&dists, &alpha, &cfg.barycenter, rng)?;
    let support = &barycenter.support;
    let nt = target.nrows();
    let cost = cost_matrix(&support.features, target)?;
    let plan = solve_plan(&support.weights, &vec![1.0 / nt as f64; nt], &cost, cfg.barycenter.solver)?;
    let x = barycentric_map(&plan, target)?;
    let transported = LabeledDataset::new(x, argmax_rows(&support.labels), support.class_count(), TARGET_DOMAIN)?;
    let loss_curve = train_erm(&mut net, &transported, &cfg.train)?;
    Ok(WbtFit { barycenter, transported, net, loss_curve })
}
