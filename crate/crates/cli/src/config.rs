//! JSON config files merged under command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Fills every flag left unset (`null`) from the config file at `path`.
/// Keys are the long flag names with `_` in place of `-`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: T, path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read config {}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(file) = file else {
        return Err(Failure::Data(format!("config {} must be a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(flags).expect("flag structs serialise");
    let Value::Object(slots) = &mut merged else {
        unreachable!("flag structs serialise to objects")
    };
    for (key, value) in file {
        match slots.get_mut(&key) {
            Some(slot) if slot.is_null() || *slot == Value::Bool(false) => *slot = value,
            Some(_) => {}
            None => return Err(Failure::Usage(format!("unknown config key `{key}` in {}", path.display()))),
        }
    }
    serde_json::from_value(merged).map_err(|e| Failure::Usage(format!("bad value in config {}: {e}", path.display())))
}
