//! Randomized functional-link classifiers for imbalanced binary data.
//!
//! The crate trains RVFL-style networks in closed form, optionally weighting
//! samples by intuitionistic-fuzzy membership scores, reweighting classes by
//! their imbalance ratio, and regularizing the output weights with a graph
//! embedding of the training design matrix. It also carries the evaluation
//! harness used by the `rvfl-cil` binary: stratified cross-validation,
//! hyperparameter grid search, noise-robustness runs, and rank-based
//! significance tests across datasets.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod featuremap;
pub mod fuzzy;
pub mod graph;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};
