use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::ot::{barycentric_map, cost_matrix, solve_plan, OtSolver, TransportPlan};
use crate::Matrix;

/// Move every source point to the barycentric image of its plan row over
/// the target sample. Labels ride along unchanged.
pub fn otda_adapt(source: &LabeledDataset, target: &Matrix, solver: OtSolver) -> Result<LabeledDataset> {
    Ok(otda_adapt_with_plan(source, target, solver)?.0)
}

pub fn otda_adapt_with_plan(
    source: &LabeledDataset,
    target: &Matrix,
    solver: OtSolver,
) -> Result<(LabeledDataset, TransportPlan)> {
    if source.is_empty() || target.nrows() == 0 {
        return Err(Error::invalid("OTDA needs nonempty source and target"));
    }
    let (ns, nt) = (source.len(), target.nrows());
    let cost = cost_matrix(source.features(), target)?;
    let plan = solve_plan(
        &alloc::vec![1.0 / ns as f64; ns],
        &alloc::vec![1.0 / nt as f64; nt],
        &cost,
        solver,
    )?;
    let moved = barycentric_map(&plan, target)?;
    Ok((source.with_features(moved)?, plan))
}
