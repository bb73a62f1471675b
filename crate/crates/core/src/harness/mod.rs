//! Experiment configuration, seeded repetitions and comparison metrics.

pub mod config;
pub mod experiment;
pub mod metrics;

pub use config::{AllocationMode, ExperimentConfig, Method, Model, QuantileProtocol};
pub use experiment::{allocate, curvature_scan, prepare_quantiles, report_from_dir, run_experiment, run_with_table, AllocateMethod, CurvaturePoint, ExperimentOutput};
pub use metrics::{compute_metrics, variance_reduction, MetricsEntry, MetricsReport, RunRow, TimingRow};
