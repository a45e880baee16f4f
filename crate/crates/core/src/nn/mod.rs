//! Feed-forward networks with hand-derived gradients.
//!
//! A net is a ReLU feature extractor `φ` followed by any number of affine
//! heads. Parameters live in one flat vector so optimizers, checkpoints and
//! finite-difference probes all see the same layout.

mod gradcheck;
mod loss;
mod net;
mod train;

pub use gradcheck::{central_difference, max_relative_error, probe_indices};
pub use loss::{
    bce_loss, cce_loss, sigmoid, soft_cce_grad_logits, soft_cce_loss, softmax_rows, PROB_FLOOR,
};
pub use net::{
    Architecture, ExtractorTape, FeedForwardNet, GradReversal, HeadKind, HeadSpec,
};
pub use train::{
    accuracy, accuracy_from_probs, epoch_batches, full_batch_loss, sgd_update, train_erm,
    train_soft, TrainConfig,
};
pub(crate) use train::{check_finite, rows};
