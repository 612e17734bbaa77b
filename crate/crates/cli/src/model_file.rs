//! JSON loaders for layer specs, model configs, and optimization plans.

use std::path::Path;

use wavefit_core::{LayerSpec, ModelConfig, OptimizationPlan};

use crate::{iofs, CliError, Result};

pub fn load_layer(path: &Path) -> Result<LayerSpec> {
    let text = iofs::read_input(path, "layer spec")?;
    let layer: LayerSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("layer spec `{}`: {e}", path.display())))?;
    layer.validate()?;
    Ok(layer)
}

pub fn load_model(path: &Path) -> Result<ModelConfig> {
    let text = iofs::read_input(path, "model config")?;
    let model: ModelConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("model config `{}`: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

pub fn load_plan(path: &Path) -> Result<OptimizationPlan> {
    let text = iofs::read_input(path, "plan")?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("plan `{}`: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, identical bytes for identical
/// values.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut json = serde_json::to_string_pretty(value).expect("value serializes");
    json.push('\n');
    json.into_bytes()
}
