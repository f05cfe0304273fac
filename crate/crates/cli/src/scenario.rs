//! Scenario files: JSON overrides layered on a compiled-in preset.

use std::path::Path;

use serde_json::{Map, Value};
use slipwalk::{preset, preset_scenarios, Preset, ScenarioConfig, WeightSweep};

use crate::error::CliError;

/// A fully resolved scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub sweep: Option<WeightSweep>,
}

impl From<Preset> for Scenario {
    fn from(p: Preset) -> Self {
        Self {
            name: p.name.to_string(),
            config: p.config,
            sweep: p.sweep,
        }
    }
}

pub fn find_preset(name: &str) -> Result<Preset, CliError> {
    preset(name).ok_or_else(|| {
        let known: Vec<_> = preset_scenarios().iter().map(|p| p.name).collect();
        CliError::Validation(format!("unknown preset `{name}` (known: {})", known.join(", ")))
    })
}

fn merge(base: &mut Value, patch: Value, path: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (key, v) in p {
                let here = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::Validation(format!("unknown key `{here}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Parses a scenario document. Every key is optional; `preset` selects the
/// base configuration and defaults to a standing robot with no schedule.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario, CliError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let Value::Object(mut doc) = doc else {
        return Err(CliError::Validation("scenario file must hold a JSON object".into()));
    };
    let base = match doc.remove("preset") {
        None => None,
        Some(Value::String(name)) => Some(find_preset(&name)?),
        Some(other) => {
            return Err(CliError::Validation(format!(
                "key `preset` must be a string, got {other}"
            )))
        }
    };
    let (name, config, sweep) = match base {
        Some(p) => (p.name.to_string(), p.config, p.sweep),
        None => (
            fallback_name.to_string(),
            ScenarioConfig::default().com_between_feet(),
            None,
        ),
    };
    let mut value = serde_json::to_value(&config).expect("configs serialize");
    merge(&mut value, Value::Object(doc), "")?;
    let config: ScenarioConfig =
        serde_json::from_value(value).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
    config.validate()?;
    Ok(Scenario { name, config, sweep })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem)
}

/// Resolves `--preset` / `--scenario`. With both, the flag acts as the
/// file's `preset` key unless the file sets one itself.
pub fn resolve(preset: Option<&str>, scenario: Option<&Path>) -> Result<Scenario, CliError> {
    match (preset, scenario) {
        (None, Some(path)) => load_scenario(path),
        (Some(name), Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
            let mut doc: Map<String, Value> = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("line {} column {}: {e}", e.line(), e.column())))?;
            doc.entry("preset").or_insert_with(|| Value::String(name.to_string()));
            parse_scenario(&Value::Object(doc).to_string(), stem)
        }
        (Some(name), None) => Ok(find_preset(name)?.into()),
        (None, None) => Err(CliError::Validation("either --preset or --scenario is required".into())),
    }
}
