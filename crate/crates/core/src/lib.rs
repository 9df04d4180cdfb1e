//! Link prediction by graph reconstruction.
//!
//! A generative graph network learns to map randomly perturbed copies of an
//! observed graph back to the observed graph. Applied to the observed graph
//! itself, its per-pair probabilities rank candidate missing links (high
//! scores on absent pairs) and spurious links (low scores on present edges).
//!
//! The pipeline:
//! - [`graph`]: edge-list ingestion, observed-graph splitting, perturbation
//!   and dataset construction.
//! - [`tensor`]: dense matrices and a tape-based reverse-mode engine.
//! - [`model`]: collaborative inference, high-order connectivity, layered
//!   propagation and the fusion MLP.
//! - [`training`]: BCE loss, Adam and the training loop.
//! - [`eval`]: AUC / AP / precision, the reconstruction protocol and the
//!   CN / RA / LP baselines.

pub mod error;
pub mod fsutil;
pub mod graph;
pub mod model;
pub mod eval;
pub mod training;
pub mod tensor;

pub use error::{Error, Result};
