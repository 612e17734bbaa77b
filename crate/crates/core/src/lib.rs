//! Wave-granularity GPU latency modeling and layer-width optimization.
//!
//! Convolutional layers deploy onto a GPU as thread blocks scheduled in
//! waves across the streaming multiprocessors. A wave costs one full
//! processing cycle even when it occupies a single SM, so layer latency is
//! a staircase in the filter count and the last partial wave is pure idle
//! tail. This crate models that mapping analytically, extracts the
//! tail-free width candidates of a profiled layer, and reconfigures whole
//! models either for latency (scale hot layers down onto wave boundaries,
//! balance the capacity loss by filling other layers' waves) or for
//! accuracy (fill every wave at zero latency cost).
//!
//! The crate is `no_std`-compatible with `alloc`; IO, file formats, and
//! the command-line front end live in the companion `wavefit` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod gpu;
pub mod optimizer;
pub mod profile;

pub use error::Error;
pub use gpu::{
    layer_flops, map_to_blocks, per_block_cycle, per_thread_flops, predict_latency,
    predict_throughput, predict_utilization, threads_per_filter, FilterStyle, GpuSpec, LayerSpec,
    MappingPolicy, ThreadMapping,
};
pub use optimizer::{
    brute_force_plan, estimate_gains, latency_gain, optimize_accuracy, optimize_latency,
    parameter_gain, BruteForceParams, GainLedger, GainMetric, LatencyOptimizeParams, LayerPlan,
    ModelConfig, ModelLayer, OptimizationPlan, OptimizeMode, PlanAction,
};
pub use profile::{
    identify_candidates, CandidateSet, ProfileRow, ProfileSource, ProfileTable, MAX_SWEEP_WIDTH,
    SCORE_REL_TOL,
};
