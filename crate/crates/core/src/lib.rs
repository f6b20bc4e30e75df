//! Trust-score segmentation defenses against model poisoning in federated
//! learning, with the attacks, baselines, and simulation harness needed to
//! evaluate them.
//!
//! Each client's trust decays with the dissimilarity of its consecutive
//! updates; a one-dimensional kernel density estimate over the trust scores
//! splits honest from suspicious clients, and only the honest segment is
//! aggregated.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod data;
pub mod defenses;
pub mod error;
pub mod kde;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod seed;
pub mod training;
pub mod trust;
pub mod vector;

pub use error::{Error, Result};
pub use orchestrator::{run_experiment, Defense, ExperimentConfig, ExperimentRun, Federation, RoundReport};
pub use vector::UpdateVector;

pub type ClientId = usize;
