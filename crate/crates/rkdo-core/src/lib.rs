//! Recursive KL-divergence optimization over response fields.
//!
//! The crate models a point cloud's neighborhood structure as a response
//! field: an n x n row-stochastic matrix whose row i is a distribution over
//! the other points. A learned field arises from embeddings through a
//! temperature softmax over dot products; a supervisory field is either held
//! fixed (the baseline) or pulled toward the learned field by an exponential
//! moving average each step (the recursive method). Training minimizes the
//! mean per-row KL divergence between the two.
//!
//! Modules:
//! - [`field`]: response fields and the operations that evolve them.
//! - [`embedding`]: coordinate tables and the unit-sphere projection.
//! - [`grad`]: analytic gradient plus a finite-difference oracle.
//! - [`optim`]: the two training loops and their optimizers.
//! - [`theory`]: numerical verification of the decay guarantees.
//! - [`dataset`]: seeded synthetic point clouds and pair augmentation.
//! - [`metrics`]: clustering and probe evaluation of embeddings.
//! - [`harness`]: config-driven experiment orchestration for the CLI.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod field;
pub mod grad;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
