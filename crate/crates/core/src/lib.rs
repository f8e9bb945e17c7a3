//! Boolean kernels and an AUC-maximizing ranker for one-class
//! collaborative filtering on binary interaction data.
//!
//! The crate is organized around a pipeline:
//!
//! * [`data`] loads user–item interactions into a binary matrix and
//!   [`folds`] splits it for cross-validated evaluation;
//! * [`kernel`] evaluates boolean kernels (linear, conjunctive,
//!   disjunctive, monotone-DNF, Tanimoto) from pairwise set statistics,
//!   and [`gram`] assembles full Gram matrices in parallel;
//! * [`ranker`] fits one small constrained quadratic program per user on
//!   a Gram matrix and scores every item;
//! * [`eval`] turns ranked lists into AUC, mAP and nDCG summaries, and
//!   [`spectral`] measures how expressive a kernel is on a dataset;
//! * [`oracle`] re-derives the combinatorial kernels from explicit
//!   feature embeddings, slowly but transparently, for verification.

pub mod binomial;
pub mod data;
pub mod error;
pub mod eval;
pub mod folds;
pub mod gram;
pub mod kernel;
pub mod oracle;
pub mod ranker;
pub mod spectral;

pub use error::{Error, Result};
