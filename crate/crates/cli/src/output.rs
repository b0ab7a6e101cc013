//! JSON envelopes and file helpers. Every JSON artifact carries
//! `schema_version` and a `kind` tag; serialization is deterministic
//! (sorted keys, no timestamps).

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

pub fn envelope<T: Serialize>(kind: &str, payload: &T) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "payload": payload,
    })
}

pub fn to_json_string(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<(), CliError> {
    write_text(path, &(to_json_string(&envelope(kind, payload)) + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// The machine-readable error document printed to standard error.
pub fn error_json(error: &CliError) -> String {
    to_json_string(&json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "error",
        "payload": {
            "exit_code": error.exit_code(),
            "message": error.message(),
        },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_has_version_kind_payload() {
        let v = envelope("test", &json!({"a": 1}));
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["kind"], "test");
        assert_eq!(v["payload"]["a"], 1);
    }

    #[test]
    fn error_json_carries_exit_code() {
        let e = CliError::Data("bad station".to_string());
        let text = error_json(&e);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["payload"]["exit_code"], 3);
        assert_eq!(v["payload"]["message"], "bad station");
    }

    #[test]
    fn serialization_is_deterministic() {
        let v = envelope("t", &json!({"z": 1, "a": 2}));
        assert_eq!(to_json_string(&v), to_json_string(&v.clone()));
    }
}
