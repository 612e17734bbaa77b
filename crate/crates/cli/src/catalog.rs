//! GPU spec resolution: a `--gpu` argument is a JSON file path or the name
//! of a bundled spec. Copies of the bundled specs ship under `gpus/` for
//! use as templates.

use std::path::Path;

use wavefit_core::{GpuSpec, MappingPolicy};

use crate::{iofs, CliError, Result};

pub const BUILTIN_GPUS: [&str; 3] = ["titan-v", "p6000", "jetson-nano"];

pub fn builtin(name: &str) -> Option<GpuSpec> {
    match name {
        "titan-v" => Some(GpuSpec::titan_v()),
        "p6000" => Some(GpuSpec::p6000()),
        "jetson-nano" => Some(GpuSpec::jetson_nano()),
        _ => None,
    }
}

/// Loads a GPU spec from a file when the argument names one, otherwise
/// falls back to the bundled catalog.
pub fn resolve_gpu(arg: &str) -> Result<GpuSpec> {
    let path = Path::new(arg);
    if path.exists() {
        let text = iofs::read_input(path, "GPU spec")?;
        let gpu: GpuSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("GPU spec `{arg}`: {e}")))?;
        gpu.validate()?;
        return Ok(gpu);
    }
    builtin(arg).ok_or_else(|| {
        CliError::Input(format!(
            "unknown GPU `{arg}`: not a file and not one of the bundled specs ({})",
            BUILTIN_GPUS.join(", ")
        ))
    })
}

/// Parses a `--policy` flag: `block-per-filter` or `fixed:<threads>`.
pub fn parse_policy(s: &str) -> std::result::Result<MappingPolicy, String> {
    if s == "block-per-filter" {
        return Ok(MappingPolicy::BlockPerFilter);
    }
    if let Some(t) = s.strip_prefix("fixed:") {
        let threads_per_block: u32 = t
            .parse()
            .map_err(|_| format!("`{t}` is not a thread count"))?;
        if threads_per_block == 0 {
            return Err(String::from("thread count must be at least 1"));
        }
        return Ok(MappingPolicy::FixedThreadsPerBlock { threads_per_block });
    }
    Err(format!(
        "`{s}` is not a mapping policy (expected `block-per-filter` or `fixed:<threads>`)"
    ))
}

pub fn policy_label(policy: MappingPolicy) -> String {
    match policy {
        MappingPolicy::BlockPerFilter => String::from("block-per-filter"),
        MappingPolicy::FixedThreadsPerBlock { threads_per_block } => {
            format!("fixed:{threads_per_block}")
        }
    }
}
