use alloc::vec;

use super::check_sources;
use crate::dataset::LabeledDataset;
use crate::error::Result;
use crate::ot::{cost_matrix, solve_plan, OtSolver};
use crate::Matrix;

/// Soft target labels from feature-only OT plans: each source sends its
/// one-hot rows along the plan, every target column is normalized by the
/// mass it received, and the per-source results are averaged.
pub fn pseudo_label_target(sources: &[LabeledDataset], target: &Matrix, solver: OtSolver) -> Result<Matrix> {
    check_sources(sources, target)?;
    let nt = target.nrows();
    let nc = sources[0].class_count();
    let mut out = Matrix::zeros(nt, nc);
    for s in sources {
        let ns = s.len();
        let cost = cost_matrix(s.features(), target)?;
        let plan = solve_plan(&vec![1.0 / ns as f64; ns], &vec![1.0 / nt as f64; nt], &cost, solver)?;
        let g = plan.values();
        let mut part = Matrix::zeros(nt, nc);
        for (i, &y) in s.labels().iter().enumerate() {
            for j in 0..nt {
                part[(j, y)] += g[(i, j)];
            }
        }
        for j in 0..nt {
            let mass: f64 = part.row(j).sum();
            if mass > 0.0 {
                for c in 0..nc {
                    out[(j, c)] += part[(j, c)] / mass;
                }
            } else {
                // Sinkhorn underflow can starve a column; fall back to uniform.
                for c in 0..nc {
                    out[(j, c)] += 1.0 / nc as f64;
                }
            }
        }
    }
    Ok(out / sources.len() as f64)
}
