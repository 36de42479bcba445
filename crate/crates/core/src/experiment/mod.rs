//! Training, evaluation, the repetition protocol and result reporting.

mod config;
pub mod metrics;
pub mod report;
mod train;

pub use config::{apply_override, ExperimentConfig};
pub use metrics::{accuracy, confusion_matrix, f1_weighted, majority_accuracy, mean_std, Evaluation};
pub use train::{
    evaluate, predict, prepare, run_repetitions, run_single, train, train_architecture, AuxiliaryMetrics,
    ComponentRun, ExperimentOutcome, MetricsSummary, Predictions, PreparedData, RunMetrics, RunResult,
    TrainOptions, TrainReport,
};
