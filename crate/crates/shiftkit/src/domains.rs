//! Turning a [`DatasetSource`] into one labeled dataset per domain.

use shiftkit_core::data::{
    balance_normal_class, extract_features, gen_synthetic_modes, preprocess_run, VarianceConvention,
};
use shiftkit_core::{DomainId, LabeledDataset, Matrix, Rng};

use crate::config::{translation_family, DatasetSource};
use crate::error::{Error, Result};
use crate::te_csv::{load_te_dir, LoadedRuns};

#[derive(Debug, Clone)]
pub struct Domains {
    pub datasets: Vec<LabeledDataset>,
    pub names: Vec<String>,
    /// Runs skipped during ingestion (incomplete or unusable).
    pub dropped_runs: usize,
    /// Domains that had fewer normal windows than requested.
    pub imbalanced: Vec<String>,
}

pub fn load_domains(src: &DatasetSource) -> Result<Domains> {
    match src {
        DatasetSource::Synthetic { modes, n_per_mode, data_seed } => {
            let datasets = gen_synthetic_modes(modes, *n_per_mode, &mut Rng::new(*data_seed))?;
            Ok(synthetic(datasets))
        }
        DatasetSource::TranslationFamily { n_modes, n_classes, dim, n_per_mode, step, noise_std, data_seed } => {
            let modes = translation_family(*n_modes, *n_classes, *dim, *step, *noise_std)?;
            let datasets = gen_synthetic_modes(&modes, *n_per_mode, &mut Rng::new(*data_seed))?;
            Ok(synthetic(datasets))
        }
        DatasetSource::TeCsv { dir, variance, normal_per_class } => {
            let loaded = load_te_dir(dir)?;
            te_domains(loaded, *variance, *normal_per_class)
        }
    }
}

fn synthetic(datasets: Vec<LabeledDataset>) -> Domains {
    let names = (0..datasets.len()).map(|m| format!("mode{}", m + 1)).collect();
    Domains { datasets, names, dropped_runs: 0, imbalanced: Vec::new() }
}

/// One sample per analysis window: the normal window is class 0, the
/// faulty window carries the run's fault class (0 for a fault-free run).
/// Normal samples are then subsampled per mode (seed 0) to
/// `normal_per_class`.
pub fn te_domains(loaded: LoadedRuns, variance: VarianceConvention, normal_per_class: usize) -> Result<Domains> {
    let mut dropped = loaded.dropped;
    let mut per_mode: std::collections::BTreeMap<u8, (Vec<Vec<f64>>, Vec<usize>)> = Default::default();
    let mut n_classes = 1;
    for run in &loaded.runs {
        let p = match preprocess_run(run, variance) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("run {} skipped: {e}", run.run_id);
                dropped += 1;
                continue;
            }
        };
        if !p.degenerate.is_empty() {
            log::debug!("run {}: {} constant variables zeroed", run.run_id, p.degenerate.len());
        }
        let entry = per_mode.entry(run.mode).or_default();
        entry.0.push(extract_features(&p.normal)?);
        entry.1.push(0);
        entry.0.push(extract_features(&p.faulty)?);
        entry.1.push(run.fault_class as usize);
        n_classes = n_classes.max(run.fault_class as usize + 1);
    }
    if per_mode.is_empty() {
        return Err(Error::Config("no usable runs in the dataset directory".into()));
    }
    let mut datasets = Vec::new();
    let mut names = Vec::new();
    let mut imbalanced = Vec::new();
    for (i, (mode, (rows, labels))) in per_mode.into_iter().enumerate() {
        let bal = balance_normal_class(&labels, normal_per_class, &mut Rng::new(0));
        if bal.imbalanced {
            imbalanced.push(format!("mode{mode}"));
        }
        let d = rows[0].len();
        let x = Matrix::from_fn(bal.keep.len(), d, |r, c| rows[bal.keep[r]][c]);
        let y = bal.keep.iter().map(|&k| labels[k]).collect();
        datasets.push(LabeledDataset::new(x, y, n_classes, DomainId(i as u32))?);
        names.push(format!("mode{mode}"));
    }
    Ok(Domains { datasets, names, dropped_runs: dropped, imbalanced })
}
