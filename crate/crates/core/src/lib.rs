//! Clustering a sequence of multinomial count vectors and choosing the number
//! of clusters with a penalized discrepancy criterion that does not charge for
//! structural zeros.
//!
//! The pipeline for a candidate cluster count `K` is:
//!
//! 1. rank-`K` projection of the count matrix ([`lowrank`]),
//! 2. clipping and column normalization into a probability matrix,
//! 3. non-negative matrix factorization and MAP label assignment ([`factorize`]),
//! 4. greedy coordinate ascent on the closed-form maximum-Lq profile
//!    objective ([`mlqe`]),
//! 5. scoring with discrepancy plus penalty ([`selection`]).
//!
//! [`datagen`], [`baselines`] and [`experiments`] reproduce the simulation
//! studies; [`metrics`] holds the evaluation functions.

pub mod baselines;
pub mod datagen;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod factorize;
pub mod io;
pub mod lowrank;
pub mod metrics;
pub mod mlqe;
pub mod rng;
pub mod selection;

pub use domain::{ClusterModel, CountMatrix, CriterionParams, Factorization, ProbabilityMatrix};
pub use error::{Error, Result};
pub use factorize::{NmfParams, NmfResult};
pub use mlqe::SearchParams;
pub use selection::{SelectionReport, SweepRecord};
