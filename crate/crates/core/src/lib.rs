//! Accelerated and plain CoCoA+ over a simulated K-worker cluster.

pub mod bench;
pub mod cluster;
pub mod error;
pub mod linalg;
pub mod local_solver;
pub mod metrics;
pub mod orchestrator;
pub mod partition;
pub mod problems;

pub use error::{Error, Result};
pub use linalg::{ColMatrix, DenseVec};
pub use partition::{AggregationParams, Partition};
pub use problems::{HingeSvmDualInstance, LassoInstance, ObjectivePair, Problem};
