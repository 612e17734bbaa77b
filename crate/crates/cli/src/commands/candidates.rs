//! `wavefit candidates`: extract the tail-free width candidates of each
//! profiled layer, from an empirical CSV or from the analytical model.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wavefit_core::{identify_candidates, MappingPolicy, ProfileSource, ProfileTable};

use crate::commands::staircase::gpu_provenance;
use crate::manifest::RunManifest;
use crate::range::WidthRange;
use crate::{catalog, iofs, model_file, profile_csv, CliError, Result};

#[derive(Debug, Args)]
pub struct CandidatesArgs {
    /// Profile CSV to read. Mutually exclusive with the analytical inputs.
    #[arg(long, conflicts_with_all = ["layer", "gpu", "widths"])]
    pub profile: Option<PathBuf>,
    /// Layer spec JSON file (analytical path).
    #[arg(long, requires = "gpu", requires = "widths")]
    pub layer: Option<PathBuf>,
    /// GPU spec file or bundled name (analytical path).
    #[arg(long)]
    pub gpu: Option<String>,
    /// Width range for the analytical sweep.
    #[arg(long)]
    pub widths: Option<String>,
    /// Maximum candidates per layer.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Mapping policy override for the analytical path.
    #[arg(long, value_parser = catalog::parse_policy)]
    pub policy: Option<MappingPolicy>,
}

#[derive(Serialize)]
struct CandidatesOut {
    layers: Vec<LayerCandidatesOut>,
}

#[derive(Serialize)]
struct LayerCandidatesOut {
    layer_id: String,
    source: &'static str,
    utilization_estimated: bool,
    m: usize,
    candidates: Vec<CandidateOut>,
}

#[derive(Serialize)]
struct CandidateOut {
    width: u32,
    score: f64,
}

pub fn run(args: &CandidatesArgs) -> Result<()> {
    let mut manifest = RunManifest::new("candidates").param("m", args.m);

    let tables: Vec<ProfileTable> = match (&args.profile, &args.layer) {
        (Some(profile), None) => {
            manifest = manifest.input(profile);
            profile_csv::load_profile_csv(profile)?
        }
        (None, Some(layer_path)) => {
            let layer = model_file::load_layer(layer_path)?;
            let gpu_arg = args.gpu.as_ref().expect("clap enforces --gpu");
            let mut gpu = catalog::resolve_gpu(gpu_arg)?;
            if let Some(policy) = args.policy {
                gpu.mapping_policy = policy;
            }
            let widths_arg = args.widths.as_ref().expect("clap enforces --widths");
            let widths = WidthRange::parse(widths_arg)
                .map_err(CliError::Input)?
                .resolve(layer.filters)?;
            manifest = gpu_provenance(manifest.input(layer_path), gpu_arg)
                .param("widths", widths_arg)
                .param("policy", catalog::policy_label(gpu.mapping_policy));
            vec![ProfileTable::analytical(&layer, &gpu, &widths)?]
        }
        _ => {
            return Err(CliError::Input(String::from(
                "pass either --profile <csv> or --layer/--gpu/--widths",
            )))
        }
    };

    let mut layers = Vec::with_capacity(tables.len());
    for table in &tables {
        let cands = identify_candidates(table, args.m)?;
        if table.utilization_estimated {
            manifest = manifest.note(format!(
                "utilization of layer `{}` backfilled from normalized throughput",
                table.layer_id
            ));
        }
        layers.push(LayerCandidatesOut {
            layer_id: cands.layer_id,
            source: match table.source {
                ProfileSource::Analytical => "analytical",
                ProfileSource::Empirical => "empirical",
            },
            utilization_estimated: table.utilization_estimated,
            m: cands.m,
            candidates: cands
                .candidates
                .into_iter()
                .zip(cands.scores)
                .map(|(width, score)| CandidateOut { width, score })
                .collect(),
        });
    }

    iofs::atomic_write(&args.out, &model_file::to_json_bytes(&CandidatesOut { layers }))?;
    manifest.write_for(&args.out)
}
