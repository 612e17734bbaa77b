//! `wavefit staircase`: sweep a layer's width and emit the
//! blocks/waves/latency view of the staircase as plot-ready CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use wavefit_core::{map_to_blocks, MappingPolicy, ProfileTable};

use crate::manifest::RunManifest;
use crate::range::WidthRange;
use crate::{catalog, iofs, model_file, CliError, Result};

#[derive(Debug, Args)]
pub struct StaircaseArgs {
    /// Layer spec JSON file.
    #[arg(long)]
    pub layer: PathBuf,
    /// GPU spec JSON file or bundled name (titan-v, p6000, jetson-nano).
    #[arg(long)]
    pub gpu: String,
    /// Width range: START..END[:STEP], absolute (64..512) or percent of
    /// the layer maximum (10%..100%:10%).
    #[arg(long)]
    pub widths: String,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Mapping policy override: block-per-filter or fixed:<threads>.
    #[arg(long, value_parser = catalog::parse_policy)]
    pub policy: Option<MappingPolicy>,
}

pub fn run(args: &StaircaseArgs) -> Result<()> {
    let layer = model_file::load_layer(&args.layer)?;
    let mut gpu = catalog::resolve_gpu(&args.gpu)?;
    if let Some(policy) = args.policy {
        gpu.mapping_policy = policy;
    }
    let widths = WidthRange::parse(&args.widths)
        .map_err(CliError::Input)?
        .resolve(layer.filters)?;
    let table = ProfileTable::analytical(&layer, &gpu, &widths)?;

    let mut csv = String::from("width,blocks,waves,latency_s,utilization,throughput_flops\n");
    for row in &table.rows {
        let mapping = map_to_blocks(&layer.with_filters(row.width), &gpu);
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.width, mapping.blocks, mapping.waves, row.latency_s, row.utilization, row.throughput
        )
        .expect("writing to memory");
    }
    iofs::atomic_write(&args.out, csv.as_bytes())?;

    let mut manifest = RunManifest::new("staircase")
        .input(&args.layer)
        .param("layer_id", &layer.layer_id)
        .param("widths", &args.widths)
        .param("policy", catalog::policy_label(gpu.mapping_policy));
    manifest = gpu_provenance(manifest, &args.gpu);
    manifest.write_for(&args.out)
}

/// Records the GPU argument as an input path when it is a file, or as a
/// parameter when it names a bundled spec.
pub fn gpu_provenance(manifest: RunManifest, gpu_arg: &str) -> RunManifest {
    let path = Path::new(gpu_arg);
    if path.exists() {
        manifest.input(path)
    } else {
        manifest.param("gpu", gpu_arg)
    }
}
