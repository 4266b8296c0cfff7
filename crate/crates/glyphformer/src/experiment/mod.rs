//! Manifest-driven dataset construction, training, evaluation metrics, and
//! the four-format comparison protocol.

mod dataset;
mod metrics;
mod trainer;

pub use dataset::{
    build_dataset, compute_splits, font_records, realize, Dataset, FontPlan, Manifest,
    ManifestEntry, ModelOverrides, SplitPlan, Task,
};
pub use metrics::{per_class_f1, MetricsReport};
pub use trainer::{
    compare_formats, evaluate, train, train_dataset, ComparisonReport, EpochLog, FormatOutcome,
    TrainOutcome, TrainProfile,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("font {path}: {source}")]
    FontLoad {
        path: String,
        source: crate::font::FontError,
    },
    #[error("class {0} has no usable training glyphs")]
    EmptyClass(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("training diverged at epoch {epoch}")]
    Divergence {
        epoch: usize,
        last_good: Box<crate::model::Checkpoint>,
    },
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
