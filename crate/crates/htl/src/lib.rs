//! Hierarchical tree labeling: simulation of broadcast models on complete
//! d-ary trees, a distance-based deep reconstruction pipeline, and the
//! shallow/local baseline classifiers it is measured against.
//!
//! The crate is organized around the experiment lifecycle:
//!
//! - [`tree`], [`label`], [`model`], [`data`] — shared domain types.
//! - [`sample`] — generation under the three models and the labeled
//!   instance distribution.
//! - [`compress`] — the histogram compression that defines the shallow
//!   algorithms' information budget.
//! - [`reconstruct`] — the deep pipeline: pairwise distance estimation,
//!   local structure, ancestral reconstruction, label propagation.
//! - [`baselines`] — local and shallow classifiers.
//! - [`experiment`] — multi-trial harnesses and report writers.
//!
//! Data-parallel sections run on rayon when the `parallel` feature
//! (default) is enabled and fall back to sequential execution otherwise;
//! results are identical either way.

pub mod baselines;
pub mod compress;
pub mod data;
pub mod experiment;
pub mod io;
pub mod label;
pub mod model;
pub mod par;
pub mod reconstruct;
pub mod rng;
pub mod sample;
pub mod tree;
