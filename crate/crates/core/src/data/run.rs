//! Process runs: a normal prefix followed by a faulty stretch, cut into two
//! equal-length windows and standardized per window.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Rng};

/// Process measurements followed by manipulated variables.
pub const N_VARS: usize = 34;
/// Length of the normal window; the fault starts right after it.
pub const NORMAL_HOURS: f64 = 30.0;
/// Length of the faulty window.
pub const FAULTY_HOURS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    /// `steps × N_VARS` readings in engineering units.
    pub series: Matrix,
    pub mode: u8,
    /// 0 for a fault-free run.
    pub fault_class: u8,
    pub run_id: u32,
    /// Hours per step.
    pub sample_period_h: f64,
}

impl RawRun {
    /// Steps per window, `round(30 h / period)`.
    pub fn segment_len(&self) -> Result<usize> {
        if !(self.sample_period_h > 0.0 && self.sample_period_h.is_finite()) {
            return Err(Error::invalid("sample period must be positive"));
        }
        Ok(libm::round(NORMAL_HOURS / self.sample_period_h) as usize)
    }

    /// First faulty step.
    pub fn fault_onset(&self) -> Result<usize> {
        self.segment_len()
    }

    /// Steps needed for both windows.
    pub fn required_steps(&self) -> Result<usize> {
        let faulty = libm::round(FAULTY_HOURS / self.sample_period_h) as usize;
        Ok(self.fault_onset()? + faulty)
    }
}

/// Denominator of the per-window variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VarianceConvention {
    /// `T - 1`.
    #[default]
    Sample,
    /// `T (T - 1)`, which inflates standardized values by `√T`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Normal,
    Faulty,
}

/// A variable with (numerically) zero spread in one window; it is set to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateVariable {
    pub segment: SegmentKind,
    pub variable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedRun {
    pub normal: Matrix,
    pub faulty: Matrix,
    pub mode: u8,
    pub fault_class: u8,
    pub run_id: u32,
    pub degenerate: Vec<DegenerateVariable>,
}

fn standardize(
    seg: Matrix,
    kind: SegmentKind,
    conv: VarianceConvention,
    flags: &mut Vec<DegenerateVariable>,
) -> Matrix {
    let t = seg.nrows() as f64;
    let denom = match conv {
        VarianceConvention::Sample => t - 1.0,
        VarianceConvention::Printed => t * (t - 1.0),
    };
    let mut seg = seg;
    for (j, mut col) in seg.column_iter_mut().enumerate() {
        let mean = col.sum() / t;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / denom;
        let sd = libm::sqrt(var);
        if sd < 1e-12 {
            col.fill(0.0);
            flags.push(DegenerateVariable { segment: kind, variable: j });
        } else {
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
    }
    seg
}

/// Cut `run` into `[0, L)` and `[onset, onset + L')` and standardize every
/// variable within its own window. The normal window is class 0, the faulty
/// one carries the run's fault class.
pub fn preprocess_run(run: &RawRun, conv: VarianceConvention) -> Result<PreprocessedRun> {
    check_dim(N_VARS, run.series.ncols())?;
    let onset = run.fault_onset()?;
    let end = run.required_steps()?;
    if onset < 2 || end - onset < 2 || run.series.nrows() < end {
        return Err(Error::invalid(alloc::format!(
            "run {} too short: {} steps, {} needed",
            run.run_id,
            run.series.nrows(),
            end
        )));
    }
    if run.series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("run {} readings", run.run_id)));
    }
    let mut degenerate = Vec::new();
    let normal = standardize(run.series.rows(0, onset).into_owned(), SegmentKind::Normal, conv, &mut degenerate);
    let faulty =
        standardize(run.series.rows(onset, end - onset).into_owned(), SegmentKind::Faulty, conv, &mut degenerate);
    Ok(PreprocessedRun { normal, faulty, mode: run.mode, fault_class: run.fault_class, run_id: run.run_id, degenerate })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Balanced {
    /// Retained sample indices in increasing order.
    pub keep: Vec<usize>,
    /// Fewer normal samples than requested were available.
    pub imbalanced: bool,
}

/// Subsample class-0 samples down to `target`; other classes are kept whole.
pub fn balance_normal_class(labels: &[usize], target: usize, rng: &mut Rng) -> Balanced {
    let normals: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let imbalanced = normals.len() < target;
    let mut keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    if imbalanced {
        keep.extend(&normals);
    } else {
        keep.extend(rng.sample_indices(normals.len(), target).into_iter().map(|k| normals[k]));
    }
    keep.sort_unstable();
    Balanced { keep, imbalanced }
}
