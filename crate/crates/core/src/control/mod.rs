//! Controller side: feature computation, classification and evaluation.

pub mod features;
pub mod io;
pub mod knn;
pub mod metrics;

pub use features::{compute_features, FeatureTuple, FEATURE_COUNT};
pub use knn::{knn_predict, KnnModel, Standardizer, TrainingPoint, DEFAULT_K};
pub use metrics::{compute_metrics, update_confusion, ConfusionCounts, MetricsReport};
