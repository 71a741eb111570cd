//! A laboratory for measuring what graph structure learning actually adds.
//!
//! Graph structure learning (GSL) pipelines rebuild a graph's edge set from
//! node representations ("bases") before training a GNN on it. This crate
//! provides every stage as a small, deterministic, dependency-light piece —
//! synthetic graph generation with a homophily knob, bases extraction,
//! structure construction and refinement, view fusion, hand-rolled neural
//! training with analytic gradients, a mutual-information estimator for
//! continuous features against discrete labels, and numeric checks of the
//! two information-theoretic limits that govern the whole exercise: the
//! Fano accuracy ceiling and the data-processing inequality.
//!
//! The `experiments` module ties the stages into reproducible sweeps and
//! ablation grids whose CSV outputs are byte-stable across runs and thread
//! counts. See the `examples/` directory for one runnable walk-through per
//! capability.
//!
//! Everything computes in `f64`, all randomness flows from explicit seeds
//! through a counter-based RNG, and no global state exists anywhere.

pub mod bases;
pub mod bundle;
pub mod construct;
pub mod csbm;
pub mod error;
pub mod experiments;
pub mod fusion;
pub mod graph;
pub mod matrix;
pub mod mi;
pub mod nn;
pub mod sparse;
pub mod theory;
pub mod viz;

pub use error::{Error, Result};
