use alloc::vec::Vec;

use super::cost::CostMatrix;
use crate::Matrix;

/// Tolerance on marginal feasibility of returned plans.
pub const TOL_MARGINAL: f64 = 1e-6;

/// Nonnegative coupling with its prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    values: Matrix,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn from_parts(values: Matrix, row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Self {
        debug_assert_eq!(values.nrows(), row_marginal.len());
        debug_assert_eq!(values.ncols(), col_marginal.len());
        TransportPlan { values, row_marginal, col_marginal }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// `⟨γ, C⟩_F`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        crate::linalg::frobenius(&self.values, cost.values())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.values.nrows()).map(|i| self.values.row(i).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.values.ncols()).map(|j| self.values.column(j).sum()).collect()
    }

    /// Largest absolute deviation of row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        let r = self
            .row_sums()
            .iter()
            .zip(&self.row_marginal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .zip(&self.col_marginal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }

    pub fn is_feasible(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0) && self.marginal_error() <= TOL_MARGINAL
    }

    pub fn nonzeros(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.sum()
    }
}
