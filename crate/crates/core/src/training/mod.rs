//! Manifests, example cropping, the training loop and a synthetic corpus.

mod dataset;
mod manifest;
pub mod synth;
mod trainer;

pub use dataset::{
    crop, crop_range, sample_example, secs_to_frame_ceil, secs_to_frame_floor, Dataset, Example, Sample, TrainingPool,
};
pub use manifest::{Label, Manifest, ManifestEntry, SYLLABLES};
pub use trainer::{
    metrics_csv, train, window_accuracy, write_metrics_csv, EvalRecord, StepMetrics, TrainConfig, TrainOutcome,
    METRICS_HEADER,
};
