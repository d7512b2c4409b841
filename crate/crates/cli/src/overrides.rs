use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Apply `key.sub=value` assignments to a serialisable config. Values are
/// read as JSON when they parse, otherwise as strings; keys must already
/// exist in the config.
pub fn apply<T: Serialize + DeserializeOwned>(config: T, sets: &[String]) -> Result<T, CliError> {
    if sets.is_empty() {
        return Ok(config);
    }
    let mut tree = serde_json::to_value(&config)?;
    for assignment in sets {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {assignment:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut tree;
        for part in key.split('.') {
            node = match node {
                Value::Object(map) => map.get_mut(part),
                Value::Array(items) => part.parse::<usize>().ok().and_then(|k| items.get_mut(k)),
                _ => None,
            }
            .ok_or_else(|| CliError::Usage(format!("unknown config key {key:?}")))?;
        }
        *node = value;
    }
    serde_json::from_value(tree).map_err(|e| CliError::Usage(format!("invalid override: {e}")))
}
