//! JDOT against a weighted mixture of sources. Source `k` sample `i`
//! carries mass `α_k / n_k`; the mixture weights are learned along with the
//! classifier.

use alloc::vec::Vec;

use super::check_sources;
use crate::dataset::{LabeledDataset, SimplexWeights};
use crate::error::{check_dim, Result};
use crate::nn::FeedForwardNet;
use crate::shallow::{alternate, JdotConfig};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WjdotConfig {
    pub jdot: JdotConfig,
    /// Initial projected-gradient step on the source weights; halved when a
    /// step would raise the objective.
    pub weight_step: f64,
    /// Starting weights; uniform when absent.
    pub init: Option<SimplexWeights>,
}

impl Default for WjdotConfig {
    fn default() -> Self {
        WjdotConfig { jdot: JdotConfig::default(), weight_step: 1.0, init: None }
    }
}

#[derive(Debug, Clone)]
pub struct WjdotModel {
    pub alpha: SimplexWeights,
    pub net: FeedForwardNet,
    /// Objective after the warm start and after every alternation.
    pub objective_trace: Vec<f64>,
    pub alpha_trace: Vec<SimplexWeights>,
}

pub fn wjdot_fit(
    sources: &[LabeledDataset],
    target: &Matrix,
    cfg: &WjdotConfig,
    net: FeedForwardNet,
) -> Result<WjdotModel> {
    check_sources(sources, target)?;
    let init = match &cfg.init {
        Some(w) => {
            check_dim(sources.len(), w.len())?;
            w.clone()
        }
        None => SimplexWeights::uniform(sources.len()),
    };
    let refs: Vec<&LabeledDataset> = sources.iter().collect();
    let step = (sources.len() > 1).then_some(cfg.weight_step);
    let alt = alternate(&refs, target, &cfg.jdot, net, init, step)?;
    Ok(WjdotModel {
        alpha: alt.weights,
        net: alt.net,
        objective_trace: alt.objective_trace,
        alpha_trace: alt.weight_trace,
    })
}
