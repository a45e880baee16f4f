//! Multi-source adaptation by optimal transport: Wasserstein barycenter
//! transport, weighted JDOT and dataset dictionary learning.

mod dadil;
mod pseudo_label;
mod wbt;
mod wjdot;

pub use dadil::{
    dadil_atomic_classifiers, dadil_e_predict, dadil_fit, dadil_r_transform, DadilConfig, DadilFit,
    Dictionary,
};
pub use pseudo_label::pseudo_label_target;
pub use wbt::{wbt_fit, WbtConfig, WbtFit};
pub use wjdot::{wjdot_fit, WjdotConfig, WjdotModel};

use crate::dataset::{DomainId, LabeledDataset};
use crate::error::{check_dim, Error, Result};
use crate::Matrix;

/// Domain id given to datasets built for the target.
pub const TARGET_DOMAIN: DomainId = DomainId(u32::MAX);

fn check_sources(sources: &[LabeledDataset], target: &Matrix) -> Result<()> {
    let first = sources.first().ok_or_else(|| Error::invalid("at least one source domain is required"))?;
    for s in sources {
        if s.is_empty() {
            return Err(Error::invalid("empty source domain"));
        }
        check_dim(first.dim(), s.dim())?;
        check_dim(first.class_count(), s.class_count())?;
    }
    if target.nrows() == 0 {
        return Err(Error::invalid("empty target domain"));
    }
    check_dim(first.dim(), target.ncols())
}
