//! Data provisioning: a synthetic multi-mode generator, process-run
//! segmentation and standardization, and per-channel summary features.

mod features;
mod run;
mod synthetic;

pub use features::{extract_features, FEATURES_PER_CHANNEL};
pub use run::{
    balance_normal_class, preprocess_run, Balanced, DegenerateVariable, PreprocessedRun, RawRun,
    SegmentKind, VarianceConvention, FAULTY_HOURS, NORMAL_HOURS, N_VARS,
};
pub use synthetic::{bayes_accuracy, gen_synthetic_modes, AffineMap, ModeSpec};
