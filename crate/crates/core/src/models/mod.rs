//! End-to-end attention detector, Deep KWS baseline and checkpoints.

mod attention;
mod baseline;
pub mod checkpoint;
mod config;
mod model;
pub mod probes;

pub use attention::{attend_average, attend_soft, pool, uniform_weights, SoftAttention, SoftAttentionTrace};
pub use baseline::{
    baseline_score, deep_kws_confidence, smooth_posteriors, uniform_alignment, CONFIDENCE_WINDOW, SMOOTH_WINDOW,
};
pub use config::{count_params, AttentionKind, EncoderKind, ModelConfig, ModelKind, DEEP_KWS_CLASSES, PROJECTION_DIM};
pub use model::{context_stack, EncoderState, EncoderTrace, Model, Recurrent};

use crate::error::Result;
use crate::numerics::Rng;

/// Builds an `f32` model with normalized initialization.
pub fn build_model(cfg: &ModelConfig, rng: &mut Rng) -> Result<Model<f32>> {
    Model::new(cfg, rng)
}
