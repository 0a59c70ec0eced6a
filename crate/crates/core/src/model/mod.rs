//! Networks, implementation descriptors, cost tables and the weighted layered
//! graph they induce.

mod cost;
mod network;
mod space;

pub use cost::{
    AttrMatch, ConversionRule, CostTable, Core, DataType, EdgeCost, EdgeOverride, ImplDescriptor,
    Layout,
};
pub use network::{LayerKind, LayerSpec, NetworkSpec, Violation};
pub use space::{
    Configuration, DesignSpace, Incompatibility, LayerSlot, Metrics, FUSED_PASSTHROUGH,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("layer {0} has no implementations in the cost table")]
    MissingImplementations(String),
    #[error("layer {layer}: fused variant expects next layer kind {expected}, found {found}")]
    FusionTargetMismatch { layer: String, expected: LayerKind, found: String },
    #[error("unknown implementation {impl_id} for layer {layer}")]
    UnknownImpl { layer: String, impl_id: String },
    #[error("duplicate implementation {impl_id} for layer {layer}")]
    DuplicateImpl { layer: String, impl_id: String },
    #[error("invalid implementation {impl_id} for layer {layer}: {reason}")]
    InvalidImpl { layer: String, impl_id: String, reason: String },
    #[error("unknown layer {0}")]
    UnknownLayer(String),
    #[error("no data dependency {from} -> {to}")]
    UnknownEdge { from: String, to: String },
    #[error("conversion rule #{0} has identical endpoints but a non-zero penalty")]
    NonZeroIdentityRule(usize),
    #[error("forbidden edge {from_layer}:{from_impl} -> {to_layer}:{to_impl}")]
    ForbiddenConfiguration {
        from_layer: String,
        to_layer: String,
        from_impl: String,
        to_impl: String,
    },
    #[error("configuration does not assign layer {0}")]
    IncompleteConfiguration(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
