//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftkit_core::data::{AffineMap, ModeSpec, VarianceConvention};
use shiftkit_core::deep::{DannConfig, DeepJdotConfig, M3sdaConfig, MmdNetConfig};
use shiftkit_core::msda::{DadilConfig, WbtConfig, WjdotConfig};
use shiftkit_core::nn::TrainConfig;
use shiftkit_core::ot::OtSolver;
use shiftkit_core::shallow::JdotConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Explicit mode specifications.
    Synthetic {
        modes: Vec<ModeSpec>,
        n_per_mode: usize,
        #[serde(default)]
        data_seed: u64,
    },
    /// Modes that differ by a growing translation; see [`translation_family`].
    TranslationFamily {
        n_modes: usize,
        n_classes: usize,
        dim: usize,
        n_per_mode: usize,
        /// Offset between consecutive modes.
        step: f64,
        noise_std: f64,
        #[serde(default)]
        data_seed: u64,
    },
    /// Directory of process-run CSV files, one domain per operating mode.
    TeCsv {
        dir: PathBuf,
        #[serde(default)]
        variance: VarianceConvention,
        /// Normal windows kept per mode.
        #[serde(default = "default_normal_per_class")]
        normal_per_class: usize,
    },
}

fn default_normal_per_class() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Every ordered (source, target) pair.
    #[default]
    Pairwise,
    /// Each domain in turn is the target; all others are sources.
    MultiSource,
}

/// Adaptation methods run on top of the source-only and target-only
/// baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Otda {
        #[serde(default)]
        solver: OtSolver,
    },
    Jdot(JdotConfig),
    MmdNet(MmdNetConfig),
    Dann(DannConfig),
    DeepJdot(DeepJdotConfig),
    Wbt(WbtConfig),
    Wjdot(WjdotConfig),
    DadilR(DadilConfig),
    DadilE(DadilConfig),
    M3sda(M3sdaConfig),
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Otda { .. } => "otda",
            MethodSpec::Jdot(_) => "jdot",
            MethodSpec::MmdNet(_) => "mmd_net",
            MethodSpec::Dann(_) => "dann",
            MethodSpec::DeepJdot(_) => "deep_jdot",
            MethodSpec::Wbt(_) => "wbt",
            MethodSpec::Wjdot(_) => "wjdot",
            MethodSpec::DadilR(_) => "dadil_r",
            MethodSpec::DadilE(_) => "dadil_e",
            MethodSpec::M3sda(_) => "m3sda",
        }
    }

    /// Uses the per-source structure (as opposed to pooling sources).
    pub fn is_multi_source(&self) -> bool {
        matches!(
            self,
            MethodSpec::Wbt(_) | MethodSpec::Wjdot(_) | MethodSpec::DadilR(_) | MethodSpec::DadilE(_) | MethodSpec::M3sda(_)
        )
    }

    /// Cannot run with a single source.
    pub fn needs_several_sources(&self) -> bool {
        matches!(self, MethodSpec::M3sda(_))
    }
}

/// The classifier every method trains (or starts from).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec { hidden: vec![32], train: TrainConfig { epochs: 100, ..TrainConfig::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Fraction of every domain used for training; the rest is the test split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_train_fraction() -> f64 {
    0.7
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        self.classifier.train.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
        Self::from_json(&text)
    }
}

/// `n_classes` isotropic classes with means on a circle of radius 2 in the
/// first two coordinates. Mode `m` is the base problem translated by
/// `m · step` along the first coordinate and `m · step / 2` along the
/// second.
pub fn translation_family(n_modes: usize, n_classes: usize, dim: usize, step: f64, noise_std: f64) -> Result<Vec<ModeSpec>> {
    if dim < 2 || n_classes < 2 || n_modes == 0 {
        return Err(Error::Config("translation family needs dim >= 2, >= 2 classes and >= 1 mode".into()));
    }
    let class_means: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            let angle = std::f64::consts::TAU * c as f64 / n_classes as f64;
            let mut m = vec![0.0; dim];
            m[0] = 2.0 * angle.cos();
            m[1] = 2.0 * angle.sin();
            m
        })
        .collect();
    Ok((0..n_modes)
        .map(|k| {
            let mut b = vec![0.0; dim];
            b[0] = k as f64 * step;
            b[1] = k as f64 * step / 2.0;
            ModeSpec {
                class_means: class_means.clone(),
                noise_std,
                transform: AffineMap::translation(b),
                priors: vec![1.0 / n_classes as f64; n_classes],
            }
        })
        .collect())
}
