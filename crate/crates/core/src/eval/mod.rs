//! Accuracy metrics, significance tests and miner benchmarks.

mod bench;
mod metrics;
mod stats;

pub use bench::{
    benchmark, benchmark_with, cross_check, dataset_fingerprint, synth_bench_db, BenchConfig,
    BenchReport,
};
pub use metrics::{f1, metrics, MetricsReport};
pub use stats::{time_significance, two_proportion_ztest, TestResult};
