//! Data ingestion, synthetic instances, reference solutions, configured
//! experiments and rate fitting.

pub mod config;
pub mod experiment;
pub mod libsvm;
pub mod rates;
pub mod reference;
pub mod synth;
