//! Latency modeling and benchmarking.

mod bench;
mod model;
mod structural;

pub use bench::{
    mean_std, run_bench, time_mode, BenchConfig, BenchEnvironment, BenchReport, BenchRow,
    DEFAULT_TRIALS, WARMUP_TRIALS,
};
pub use model::{
    fit_latency_model, predict_latency, LatencyModel, DEFAULT_CLOCK_HZ, REPORTED_LATENCIES,
};
pub use structural::{structural_cycles, PipelineOverlap};
