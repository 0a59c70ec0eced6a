//! Synthetic networks and cost tables with realistic structure, and ingest
//! of measured benchmark records.

mod costs;
mod ingest;
mod networks;

pub use costs::{gen_cost_table, impl_id, CostProfile, UpliftRange};
pub use ingest::{ingest_measurements, read_measurements_csv, MeasurementRecord};
pub use networks::{gen_network, Preset};

use thiserror::Error;

use crate::model::DesignSpace;

pub const PRESET_NAMES: [&str; 4] = ["squeezenet_like", "resnet_like", "mobilenet_like", "chain"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown preset {0:?}; valid presets: squeezenet_like, resnet_like, mobilenet_like, chain")]
    UnknownPreset(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no runs left after warm-up for {layer}/{impl_id}")]
    NoRunsAfterWarmup { layer: String, impl_id: String },
    #[error("conflicting duplicate records for {layer}/{impl_id}: memory {a} vs {b}")]
    ConflictingDuplicates { layer: String, impl_id: String, a: u64, b: u64 },
    #[error("invalid record on line {line}: {detail}")]
    InvalidRecord { line: usize, detail: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Network and cost table for a preset with its default profile.
pub fn preset_space(preset: Preset, seed: u64) -> DesignSpace {
    let net = gen_network(preset);
    let profile = CostProfile { seed, ..CostProfile::for_preset(preset) };
    let table = gen_cost_table(&net, &profile).expect("default profile is valid");
    DesignSpace::build(&net, &table).expect("generated tables cover every layer")
}
