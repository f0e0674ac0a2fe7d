//! Detection of a planted `k1 × k2` community in a bipartite Erdős–Rényi graph.
//!
//! The crate provides samplers for the null and planted models, the total,
//! truncated and max truncated degree statistics with analytic or calibrated
//! thresholds, the rate functions that select between them, exact
//! second-moment lower bounds, and a deterministic Monte Carlo harness.
//!
//! Parallel execution is provided by rayon behind the default `parallel`
//! feature. Every result is independent of the worker count.

pub mod combin;
pub mod detectors;
pub mod error;
pub mod exec;
pub mod graph_model;
pub mod harness;
pub mod kernel;
pub mod lower_bound;
pub mod matrix;
pub mod rates;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use graph_model::{PlantedSupport, ProblemShape, SignalConfig};
pub use kernel::BennettKernel;
pub use matrix::AdjacencyMatrix;
