//! Analytical model of convolutional-layer execution at wave granularity.
//!
//! Each spatial output cell is computed by one thread; threads group into
//! blocks, and blocks deploy onto streaming multiprocessors (SMs) in
//! sequential waves. A wave costs one full processing cycle no matter how
//! few SMs it occupies, so latency is piecewise constant in the filter
//! count and steps up each time the wave count increments. The last,
//! partially filled wave is the tail that this crate exists to eliminate.

use alloc::string::String;

use crate::error::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How threads are grouped into blocks before deployment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum MappingPolicy {
    /// One block per convolution filter. This is what direct-convolution
    /// deployments exhibit in practice and is the default.
    #[default]
    BlockPerFilter,
    /// Blocks of a fixed thread count, the way real kernels cap block size.
    FixedThreadsPerBlock { threads_per_block: u32 },
}

/// Hardware capacity of one GPU.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GpuSpec {
    pub name: String,
    /// Number of streaming multiprocessors.
    pub sm_count: u32,
    /// Peak throughput of the whole device in FLOP/s.
    pub peak_flops: f64,
    /// Calibration scalar in (0, 1]: the fraction of peak throughput a
    /// fully resident wave actually sustains. Folds effects such as
    /// multi-block residency that the model does not track explicitly.
    #[cfg_attr(feature = "serde", serde(default = "default_efficiency"))]
    pub efficiency: f64,
    /// Fixed per-launch cost in seconds added to every predicted latency.
    /// Zero by default, which keeps the pure wave model. A realistic value
    /// (a few microseconds) is what flattens the staircase of very light
    /// kernels such as depthwise filters.
    #[cfg_attr(feature = "serde", serde(default))]
    pub launch_overhead_s: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mapping_policy: MappingPolicy,
}

#[cfg(feature = "serde")]
fn default_efficiency() -> f64 {
    1.0
}

impl GpuSpec {
    pub fn new(name: &str, sm_count: u32, peak_flops: f64) -> Self {
        GpuSpec {
            name: String::from(name),
            sm_count,
            peak_flops,
            efficiency: 1.0,
            launch_overhead_s: 0.0,
            mapping_policy: MappingPolicy::BlockPerFilter,
        }
    }

    /// Titan-V: Volta, 80 SMs, 14.9 TFLOP/s peak.
    pub fn titan_v() -> Self {
        Self::new("titan-v", 80, 14.9e12)
    }

    /// Quadro P6000: Pascal, 30 SMs, 12.0 TFLOP/s peak.
    pub fn p6000() -> Self {
        Self::new("p6000", 30, 12.0e12)
    }

    /// Jetson Nano: a single unified 128-core unit, modeled as one SM,
    /// 0.24 TFLOP/s peak.
    pub fn jetson_nano() -> Self {
        Self::new("jetson-nano", 1, 0.24e12)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.sm_count == 0 {
            return Err(Error::InvalidField {
                field: "sm_count",
                message: String::from("must be at least 1"),
            });
        }
        if !self.peak_flops.is_finite() || self.peak_flops <= 0.0 {
            return Err(Error::InvalidField {
                field: "peak_flops",
                message: String::from("must be a positive, finite FLOP/s value"),
            });
        }
        if self.efficiency.is_nan() || self.efficiency <= 0.0 || self.efficiency > 1.0 {
            return Err(Error::InvalidField {
                field: "efficiency",
                message: String::from("must lie in (0, 1]"),
            });
        }
        if !self.launch_overhead_s.is_finite() || self.launch_overhead_s < 0.0 {
            return Err(Error::InvalidField {
                field: "launch_overhead_s",
                message: String::from("must be a finite, non-negative duration"),
            });
        }
        if let MappingPolicy::FixedThreadsPerBlock { threads_per_block } = self.mapping_policy {
            if threads_per_block == 0 {
                return Err(Error::InvalidField {
                    field: "mapping_policy.threads_per_block",
                    message: String::from("must be at least 1"),
                });
            }
        }
        Ok(())
    }

    /// Peak throughput of a single SM.
    pub fn peak_flops_per_sm(&self) -> f64 {
        self.peak_flops / self.sm_count as f64
    }
}

/// Kernel style of a convolutional layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FilterStyle {
    /// Kernel spans the full input depth.
    Dense,
    /// Kernel depth 1 applied per channel; far lighter per-thread work.
    Depthwise,
}

/// One convolutional layer's workload description.
///
/// Output spatial size equals input (same padding, stride 1), so each of
/// the `in_h * in_w` output cells of each sample maps to one thread.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LayerSpec {
    pub layer_id: String,
    /// Number of filters, i.e. the maximum layer width.
    pub filters: u32,
    pub kernel_h: u32,
    pub kernel_w: u32,
    pub in_depth: u32,
    pub in_h: u32,
    pub in_w: u32,
    #[cfg_attr(feature = "serde", serde(default = "default_batch"))]
    pub batch: u32,
    #[cfg_attr(feature = "serde", serde(default = "default_filter_style"))]
    pub filter_style: FilterStyle,
}

#[cfg(feature = "serde")]
fn default_batch() -> u32 {
    1
}

#[cfg(feature = "serde")]
fn default_filter_style() -> FilterStyle {
    FilterStyle::Dense
}

impl LayerSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layer_id: &str,
        filters: u32,
        kernel_h: u32,
        kernel_w: u32,
        in_depth: u32,
        in_h: u32,
        in_w: u32,
        batch: u32,
        filter_style: FilterStyle,
    ) -> Self {
        LayerSpec {
            layer_id: String::from(layer_id),
            filters,
            kernel_h,
            kernel_w,
            in_depth,
            in_h,
            in_w,
            batch,
            filter_style,
        }
    }

    /// Square dense layer shorthand: `kernel x kernel x depth` over an
    /// `edge x edge` input, batch 1.
    pub fn dense_square(layer_id: &str, filters: u32, kernel: u32, in_depth: u32, edge: u32) -> Self {
        Self::new(layer_id, filters, kernel, kernel, in_depth, edge, edge, 1, FilterStyle::Dense)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive: [(&'static str, u32); 7] = [
            ("filters", self.filters),
            ("kernel_h", self.kernel_h),
            ("kernel_w", self.kernel_w),
            ("in_depth", self.in_depth),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
            ("batch", self.batch),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(Error::InvalidField {
                    field,
                    message: String::from("must be at least 1"),
                });
            }
        }
        Ok(())
    }

    /// The same geometry at a different active width.
    pub fn with_filters(&self, filters: u32) -> LayerSpec {
        LayerSpec {
            filters,
            ..self.clone()
        }
    }
}

/// How a layer's threads land on a GPU.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreadMapping {
    pub threads_per_filter: u64,
    pub threads_per_block: u64,
    /// Total thread blocks for this layer.
    pub blocks: u64,
    /// Sequential deployment rounds: `ceil(blocks / sm_count)`.
    pub waves: u64,
    /// Duration of one processing cycle in seconds.
    pub cycle_time: f64,
}

/// Threads needed for one filter: one per spatial output cell per sample.
///
/// Batch multiplies the per-filter thread count rather than the block
/// count, which is why larger batches raise the staircase height instead
/// of adding steps.
pub fn threads_per_filter(layer: &LayerSpec) -> u64 {
    layer.in_h as u64 * layer.in_w as u64 * layer.batch as u64
}

/// FLOPs one thread performs: a multiply and an accumulate per kernel cell.
/// Depthwise kernels have depth 1 regardless of the input depth.
pub fn per_thread_flops(layer: &LayerSpec) -> u64 {
    let depth = match layer.filter_style {
        FilterStyle::Dense => layer.in_depth as u64,
        FilterStyle::Depthwise => 1,
    };
    2 * layer.kernel_h as u64 * layer.kernel_w as u64 * depth
}

/// Total FLOPs of the layer across all filters and samples.
pub fn layer_flops(layer: &LayerSpec) -> f64 {
    let total = threads_per_filter(layer) as u128
        * layer.filters as u128
        * per_thread_flops(layer) as u128;
    total as f64
}

/// Number of threads per block under the GPU's mapping policy.
fn threads_per_block(layer: &LayerSpec, gpu: &GpuSpec) -> u64 {
    match gpu.mapping_policy {
        MappingPolicy::BlockPerFilter => threads_per_filter(layer),
        MappingPolicy::FixedThreadsPerBlock { threads_per_block } => threads_per_block as u64,
    }
}

/// Maps the layer onto thread blocks and waves.
pub fn map_to_blocks(layer: &LayerSpec, gpu: &GpuSpec) -> ThreadMapping {
    let tpf = threads_per_filter(layer);
    let (tpb, blocks) = match gpu.mapping_policy {
        MappingPolicy::BlockPerFilter => (tpf, layer.filters as u64),
        MappingPolicy::FixedThreadsPerBlock { threads_per_block } => {
            let tpb = threads_per_block as u64;
            let total_threads = tpf as u128 * layer.filters as u128;
            let blocks = total_threads.div_ceil(tpb as u128) as u64;
            (tpb, blocks)
        }
    };
    let waves = blocks.div_ceil(gpu.sm_count as u64);
    ThreadMapping {
        threads_per_filter: tpf,
        threads_per_block: tpb,
        blocks,
        waves,
        cycle_time: per_block_cycle(layer, gpu),
    }
}

/// Duration of one processing cycle: the block's work divided by what one
/// SM sustains. Under block-per-filter mapping this grows linearly with
/// batch size, which is what makes larger batches produce taller stairs.
pub fn per_block_cycle(layer: &LayerSpec, gpu: &GpuSpec) -> f64 {
    let work = (threads_per_block(layer, gpu) * per_thread_flops(layer)) as f64;
    work / (gpu.peak_flops_per_sm() * gpu.efficiency)
}

/// Predicted layer latency: `launch_overhead + cycle_time * waves`.
///
/// With zero overhead this is exactly the cycle time times the wave count,
/// piecewise constant in the filter count on each interval
/// `((k-1)*S, k*S]`. Rows inside one such steady interval are bit
/// identical.
pub fn predict_latency(layer: &LayerSpec, gpu: &GpuSpec) -> f64 {
    let mapping = map_to_blocks(layer, gpu);
    gpu.launch_overhead_s + mapping.cycle_time * mapping.waves as f64
}

/// Modeled average SM occupancy across all waves: `B / (ceil(B/S) * S)`.
/// Equals 1 exactly when the SM count divides the block count.
pub fn predict_utilization(layer: &LayerSpec, gpu: &GpuSpec) -> f64 {
    let mapping = map_to_blocks(layer, gpu);
    mapping.blocks as f64 / (mapping.waves * gpu.sm_count as u64) as f64
}

/// Predicted throughput: total FLOPs over predicted latency.
///
/// With zero launch overhead and block-per-filter mapping this reaches
/// `peak_flops * efficiency` exactly at wave boundaries and stays strictly
/// below it everywhere else.
pub fn predict_throughput(layer: &LayerSpec, gpu: &GpuSpec) -> f64 {
    layer_flops(layer) / predict_latency(layer, gpu)
}
