//! Config resolution: command preset, then the JSON file, then flags.

use std::fs;
use std::path::Path;

use mcpc::SystemConfig;
use serde_json::Value;

use crate::CliError;

/// Merge the keys of a JSON config file over `preset`.
///
/// Keys must be `SystemConfig` field names; the first unknown key is reported.
pub fn load(preset: SystemConfig, path: Option<&Path>) -> Result<SystemConfig, CliError> {
    let Some(path) = path else {
        return Ok(preset);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    merge(preset, &text).map_err(|msg| CliError::Usage(format!("config {}: {msg}", path.display())))
}

pub fn merge(preset: SystemConfig, text: &str) -> Result<SystemConfig, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(entries) = doc else {
        return Err("expected a JSON object of configuration keys".into());
    };
    let mut merged = serde_json::to_value(preset).expect("config serializes");
    let fields = merged.as_object_mut().expect("config is an object");
    for (key, value) in entries {
        if !fields.contains_key(&key) {
            return Err(format!("unknown key `{key}`"));
        }
        fields.insert(key, value);
    }
    serde_json::from_value(merged).map_err(|e| e.to_string())
}
