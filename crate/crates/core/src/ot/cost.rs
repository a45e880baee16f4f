use alloc::format;

use crate::dataset::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::sq_distances;
use crate::Matrix;

/// How label disagreement is charged on top of the feature cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LabelCost {
    /// `β [y ≠ y']` on hard labels; `(β/2) ‖y - y'‖²` on soft label rows,
    /// which agrees with the indicator on one-hot rows.
    Indicator,
    /// `β ‖y - y'‖²` (one-hot rows of different classes are at distance² 2).
    SquaredLabel,
}

impl LabelCost {
    fn soft_scale(self) -> f64 {
        match self {
            LabelCost::Indicator => 0.5,
            LabelCost::SquaredLabel => 1.0,
        }
    }
}

/// Descriptor of the ground cost a [`CostMatrix`] was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroundCost {
    SquaredEuclidean,
    LabelAugmented { beta: f64, mode: LabelCost },
    Jdot { alpha: f64, beta: f64 },
    Custom,
}

/// Nonnegative, finite `n_S × n_T` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Matrix,
    kind: GroundCost,
}

impl CostMatrix {
    pub fn new(values: Matrix, kind: GroundCost) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost matrix".into()));
        }
        if values.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid("cost matrix entries must be nonnegative"));
        }
        Ok(CostMatrix { values, kind })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn kind(&self) -> GroundCost {
        self.kind
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.sum() / self.values.len() as f64
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, b| a.max(*b))
    }
}

/// Squared Euclidean cost between the rows of `x` and `y`.
pub fn cost_matrix(x: &Matrix, y: &Matrix) -> Result<CostMatrix> {
    CostMatrix::new(sq_distances(x, y)?, GroundCost::SquaredEuclidean)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("label weight beta must be >= 0, got {beta}")));
    }
    Ok(())
}

/// `‖x - x'‖² + β · label term` between two hard-labeled datasets.
pub fn labeled_cost_matrix(
    p: &LabeledDataset,
    q: &LabeledDataset,
    beta: f64,
    mode: LabelCost,
) -> Result<CostMatrix> {
    check_beta(beta)?;
    check_dim(p.class_count(), q.class_count())?;
    let mut c = sq_distances(p.features(), q.features())?;
    let penalty = match mode {
        LabelCost::Indicator => beta,
        LabelCost::SquaredLabel => 2.0 * beta,
    };
    for (i, &yi) in p.labels().iter().enumerate() {
        for (j, &yj) in q.labels().iter().enumerate() {
            if yi != yj {
                c[(i, j)] += penalty;
            }
        }
    }
    CostMatrix::new(c, GroundCost::LabelAugmented { beta, mode })
}

/// Label-augmented cost between supports carrying soft label rows.
pub fn soft_labeled_cost(
    x1: &Matrix,
    y1: &Matrix,
    x2: &Matrix,
    y2: &Matrix,
    beta: f64,
    mode: LabelCost,
) -> Result<CostMatrix> {
    check_beta(beta)?;
    check_dim(y1.ncols(), y2.ncols())?;
    let mut c = sq_distances(x1, x2)?;
    if beta > 0.0 {
        let lab = sq_distances(y1, y2)?;
        let w = beta * mode.soft_scale();
        c += lab * w;
    }
    CostMatrix::new(c, GroundCost::LabelAugmented { beta, mode })
}
