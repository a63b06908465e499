//! Toy-scale adversarial benchmark: a generator MLP stands in for the
//! policy and is trained against the critic under each loss family, so the
//! critic's output drift, reward fluctuation and mode collapse can be
//! measured without a physics simulator.

pub mod dataset;
pub mod metrics;
pub mod report;
pub mod train;

pub use dataset::{
    make_dataset, Dataset, DatasetSpec, Mixture, MotionDataset, MotionManifest,
    SELECTION_PROBABILITY,
};
pub use metrics::{
    median, mode_coverage, rolling_std_max, stability_metrics, Coverage, Stability,
    COVERAGE_THRESHOLD,
};
pub use report::{
    emit_report, summarize, write_run_csv, write_summary_csv, LossSummary, SUMMARY_WINDOW,
};
pub use train::{
    run_name, train_adversarial, train_adversarial_on, train_run, BenchmarkSpec, RunReport,
    StepRecord,
};
