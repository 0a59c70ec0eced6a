//! Design-space exploration for per-layer DNN deployment.
//!
//! A [`model::DesignSpace`] binds a layer graph to a table of measured (or
//! synthetic) per-layer implementation costs. The [`search`] module explores
//! it with tabular Q-learning and a set of baseline searches; [`pareto`]
//! turns learnt solutions into latency/accuracy/memory trade-offs; [`optim`]
//! holds the network-level passes (static fusion, in-place and pooled
//! activation memory, quantisation calibration); [`synth`] produces cost
//! tables with realistic structure or ingests benchmark records.

pub mod model;
pub mod fixtures;
pub mod search;
pub mod pareto;
pub mod optim;
pub mod synth;
