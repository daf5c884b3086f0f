//! Experiment config files (JSON) and `key=value` overrides.

use std::path::Path;

use hmbandit_core::regret::ExperimentConfig;
use serde_json::Value;

use crate::{CliError, Result};

/// Reads `path`, applies `overrides` in order and validates the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Sets a dotted `key=value` path. The value is read as JSON when it parses,
/// otherwise as a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{spec}` has an empty key")));
    }
    let parsed = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}
