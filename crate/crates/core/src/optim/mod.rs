//! Network-level passes: static fusion of bnorm/scale into the preceding
//! linear layer, in-place and pooled activation memory planning, and
//! post-training quantisation calibration.

mod fusion;
mod memory;
mod quant;

pub use fusion::{fuse_static, BnormParams, FoldableParams, FusionResult, LinearParams, ScaleParams};
pub use memory::{plan_inplace, plan_memory_pool, plan_network_memory, tensor_lifetimes, PoolPlan, TensorLifetime};
pub use quant::{
    kl_calibrate, quant_params_minmax, quantize_roundtrip, Histogram, QuantMode,
    QuantParams, DEFAULT_HISTOGRAM_BINS, DEFAULT_LEVELS,
};

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("{layer} cannot be folded: predecessor {predecessor} is not a single-consumer convolution or fully connected layer")]
    NonFoldablePlacement { layer: String, predecessor: String },
    #[error("missing parameters for layer {0}")]
    MissingParams(String),
    #[error("shape mismatch at {layer}: {detail}")]
    ShapeMismatch { layer: String, detail: String },
    #[error("non-positive variance + epsilon at {layer} channel {channel}")]
    InvalidVariance { layer: String, channel: usize },
    #[error("invalid network: {0:?}")]
    InvalidNetwork(Vec<Violation>),
    #[error("tensor {0} is consumed before it is produced")]
    InvalidLifetime(String),
    #[error("degenerate range [{min}, {max}]")]
    DegenerateRange { min: f64, max: f64 },
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("histogram has {bins} bins; at least {levels} are needed")]
    TooFewBins { bins: usize, levels: usize },
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
