//! `wavefit optimize`: reconfigure a model's layer widths for latency or
//! accuracy against analytical or measured profiles.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use wavefit_core::{
    optimize_accuracy, optimize_latency, GainMetric, LatencyOptimizeParams, MappingPolicy,
    ModelConfig, ProfileTable,
};

use crate::commands::staircase::gpu_provenance;
use crate::manifest::RunManifest;
use crate::{catalog, iofs, model_file, profile_csv, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Latency,
    Accuracy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// Raw filter-count deltas.
    Width,
    /// Deltas weighted by per-filter parameters (default).
    Params,
}

impl From<MetricArg> for GainMetric {
    fn from(arg: MetricArg) -> Self {
        match arg {
            MetricArg::Width => GainMetric::WidthDelta,
            MetricArg::Params => GainMetric::ParamCount,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Model config JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// GPU spec file or bundled name; profiles each layer analytically
    /// over widths 1..=filters.
    #[arg(long, conflicts_with = "profile")]
    pub gpu: Option<String>,
    /// Measured profile CSV covering every layer.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Maximum candidates per layer.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Parameter-gain tolerance band (latency mode), in metric units.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Targeted latency ratio: the plan must reach L_new <= delta * L_old.
    #[arg(long, default_value_t = 0.85)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Params)]
    pub metric: MetricArg,
    /// How many times tau may double before giving up (latency mode).
    #[arg(long, default_value_t = 8)]
    pub max_retries: u32,
    /// Output plan JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Mapping policy override for analytical profiling.
    #[arg(long, value_parser = catalog::parse_policy)]
    pub policy: Option<MappingPolicy>,
}

fn analytical_tables(
    model: &ModelConfig,
    gpu_arg: &str,
    policy: Option<MappingPolicy>,
) -> Result<Vec<ProfileTable>> {
    let mut gpu = catalog::resolve_gpu(gpu_arg)?;
    if let Some(policy) = policy {
        gpu.mapping_policy = policy;
    }
    model
        .layers
        .iter()
        .map(|layer| {
            let widths: Vec<u32> = (1..=layer.spec.filters).collect();
            ProfileTable::analytical(&layer.spec, &gpu, &widths).map_err(CliError::from)
        })
        .collect()
}

pub fn run(args: &OptimizeArgs) -> Result<()> {
    let model = model_file::load_model(&args.model)?;
    let mut manifest = RunManifest::new("optimize")
        .input(&args.model)
        .param("mode", format!("{:?}", args.mode).to_lowercase())
        .param("m", args.m)
        .param("metric", match args.metric {
            MetricArg::Width => "width",
            MetricArg::Params => "params",
        });

    let tables = match (&args.gpu, &args.profile) {
        (Some(gpu_arg), None) => {
            manifest = gpu_provenance(manifest, gpu_arg);
            if let Some(policy) = args.policy {
                manifest = manifest.param("policy", catalog::policy_label(policy));
            }
            analytical_tables(&model, gpu_arg, args.policy)?
        }
        (None, Some(profile)) => {
            manifest = manifest.input(profile);
            profile_csv::load_profile_csv(profile)?
        }
        _ => {
            return Err(CliError::Input(String::from(
                "pass either --gpu <spec> or --profile <csv>",
            )))
        }
    };

    let plan = match args.mode {
        ModeArg::Latency => {
            let tau = args.tau.ok_or_else(|| {
                CliError::Input(String::from("latency mode requires --tau"))
            })?;
            manifest = manifest
                .param("tau", tau)
                .param("delta", args.delta)
                .param("max_retries", args.max_retries);
            optimize_latency(
                &model,
                &tables,
                &LatencyOptimizeParams {
                    m: args.m,
                    tau,
                    delta: args.delta,
                    metric: args.metric.into(),
                    max_retries: args.max_retries,
                },
            )?
        }
        ModeArg::Accuracy => optimize_accuracy(&model, &tables, args.metric.into())?,
    };

    iofs::atomic_write(&args.out, &model_file::to_json_bytes(&plan))?;
    for note in &plan.notes {
        manifest = manifest.note(note);
    }
    manifest.write_for(&args.out)?;

    if plan.feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "plan written to `{}` but the latency target was not reached",
            args.out.display()
        )))
    }
}
