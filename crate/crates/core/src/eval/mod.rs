//! Labeling metrics, hyperparameter selection for the sign estimator and
//! the benchmark harness.

mod bench;
mod cv;
mod metrics;
mod report;

pub use bench::{
    run_benchmark, run_method, ExperimentConfig, Method, MethodSettings, MethodSummary, ResultTable, Source, TrialRecord,
    DEFAULT_FOLDS, DEFAULT_KMEANS_RESTARTS, DEFAULT_LAMBDAS, DEFAULT_SIGMA_MULTIPLIERS, SCHEMA_VERSION,
};
pub use cv::{cross_validate_dsdd, cross_validate_dsdd_with, CvSettings, DsddCv};
pub use metrics::{
    expected_random_ler, expected_random_ler_exact, ler, mcr, per_dataset_rate, LabelingResult,
};
pub use report::{sig4, to_json_exact};
