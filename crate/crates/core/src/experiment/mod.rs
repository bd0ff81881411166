//! Experiment orchestration: configuration files, the dataset-to-views
//! pipeline, study execution with result files, and cross-seed reports.

mod config;
mod pipeline;
mod report;
mod runner;

pub use config::{
    AlignmentConfig, ChannelConfig, DatasetConfig, DpSection, ExperimentConfig, ModelConfig,
    OptimizerConfig, OutputConfig, QuantizeSection, ResolvedPlan, SweepAxis, TrainConfig,
};
pub use pipeline::{prepare, PreparedData};
pub use report::{aggregate, render_table, write_report, EpochAggregate, REPORT_FILE};
pub use runner::{
    execute, execute_prepared, mean_std, run_to_dir, sweep_to_dir, write_run, ExecutedStudy,
    SeedRun, METRICS_FILE, RESOLVED_CONFIG_FILE, SUMMARY_FILE,
};
