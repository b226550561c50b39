//! Per-sentence four-class classification.
//!
//! [`SentenceClassifier`] is the pluggable interface; [`LinearModel`] is the
//! reference implementation, a softmax regression over hashed unigram and
//! bigram counts.

pub mod features;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod train;

pub use features::{featurize, SparseVector, DEFAULT_FEATURE_DIM};
pub use metrics::{evaluate, ConfusionScores, EvalMetrics, LabelPredictor};
pub use model::{softmax, LinearModel, ModelPrediction, SentenceClassifier};
pub use train::{train, EpochStats, ModelSpec, TrainOutcome, TrainingConfig};
