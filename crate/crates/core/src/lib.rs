//! Optimal transport, distribution divergences and domain adaptation for
//! classification under distribution shift.
//!
//! The crate is `no_std` and only needs an allocator. Everything that touches
//! files, the clock or threads lives in the `shiftkit` companion crate.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`dataset`] | labeled datasets, empirical distributions, simplex weights |
//! | [`ot`] | ground costs, network simplex, log-domain Sinkhorn, barycenters |
//! | [`divergence`] | MMD and the H-distance |
//! | [`nn`] | small feed-forward nets with hand-derived gradients |
//! | [`shallow`] | TCA, OTDA, JDOT |
//! | [`deep`] | MMD-net, DANN, DeepJDOT, M3SDA |
//! | [`msda`] | WBT, WJDOT, DaDiL |
//! | [`data`] | synthetic multi-mode generator, run preprocessing, features |

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod dataset;
pub mod deep;
pub mod divergence;
mod error;
pub mod linalg;
pub mod msda;
pub mod nn;
pub mod ot;
mod rng;
pub mod shallow;

pub use dataset::{
    argmax_rows, one_hot, DomainId, EmpiricalDistribution, LabeledDataset, SimplexWeights,
    SoftLabeled,
};
pub use error::{Error, Result};
pub use rng::Rng;

/// Dense row-major-by-convention matrix: rows are samples, columns features.
pub type Matrix = nalgebra::DMatrix<f64>;
